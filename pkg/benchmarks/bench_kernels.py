"""Time the search kernels compiled with numba against the pure-Python fallback.

Each mode runs in its own interpreter because the backend is fixed at import time:

    python3 benchmarks/bench_kernels.py [--seed 0] [--solves 20]
"""

import argparse
import json
import os
import subprocess
import sys
import time

CHILD = r"""
import json, sys, time
import numpy as np
from metrocrew.model import desk_config, instance_from_dict
from metrocrew.htsn import NetworkView, build_network
from metrocrew.pulse import Limits, solve_cspp
from metrocrew import _kernels

seed, solves = int(sys.argv[1]), int(sys.argv[2])
inst = instance_from_dict(desk_config(seed))
net = build_network(inst)
rng = np.random.default_rng(seed)
views = []
for i in range(solves):
    cost = net.cost.copy()
    cost[net.kind == 0] -= rng.uniform(0, 40, int((net.kind == 0).sum()))  # random duals on train arcs
    views.append(NetworkView(net, cost=cost))
lim = Limits.planning(inst)
t0 = time.perf_counter()
first = solve_cspp(views[0], lim)
t_first = time.perf_counter() - t0
t0 = time.perf_counter()
costs = [first.cost] + [solve_cspp(v, lim).cost for v in views[1:]]
t_rest = time.perf_counter() - t0
print(json.dumps({"numba": _kernels.USE_NUMBA, "first_s": t_first, "per_solve_s": t_rest / max(solves - 1, 1),
                  "costs": [round(c, 9) for c in costs]}))
"""


def run(no_numba: bool, seed: int, solves: int) -> dict:
    env = dict(os.environ)
    if no_numba:
        env["METROCREW_NO_NUMBA"] = "1"
    else:
        env.pop("METROCREW_NO_NUMBA", None)
    out = subprocess.run([sys.executable, "-c", CHILD, str(seed), str(solves)], env=env, check=True,
                         capture_output=True, text=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--solves", type=int, default=20)
    a = ap.parse_args()
    fast = run(False, a.seed, a.solves)
    slow = run(True, a.seed, a.solves)
    print(f"{'backend':<10}{'first solve [s]':>18}{'per solve [s]':>16}")
    for name, r in (("numba", fast), ("python", slow)):
        print(f"{name:<10}{r['first_s']:>18.3f}{r['per_solve_s']:>16.4f}")
    print(f"speed-up per solve: {slow['per_solve_s'] / fast['per_solve_s']:.1f}x")
    print("same optimal costs:", fast["costs"] == slow["costs"])


if __name__ == "__main__":
    main()
