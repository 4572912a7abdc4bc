"""metrocrew command line: gen, plan, replan, validate, bench."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench import load_config, run_benchmark, run_plan, run_replan
from .htsn import NetworkError, build_network
from .matching import AssignmentError
from .model import (InstanceError, desk_config, instance_from_dict, load_instance, save_instance,
                    shanghai_like_config)
from .planner import SolverError
from .replanner import apply_disruption, load_scenario, surge_scenario, validate_replan
from .roster import load_roster, save_roster
from .validate import ReplanMode, validate_roster

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_SOLVER = 0, 1, 2, 3

log = logging.getLogger("metrocrew")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common(p):
    p.add_argument("--seed", type=int, default=None, help="base seed (default 0, or the config's)")
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="metrocrew", description="Metro crew planning and replanning.")
    sub = ap.add_subparsers(dest="cmd", parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("gen", help="generate an instance")
    g.add_argument("--config", type=Path, help="generator config (instance JSON without tasks)")
    g.add_argument("--preset", choices=["desk", "shanghai"])
    g.add_argument("--n-r", type=int)
    g.add_argument("--days", type=int)

    p = sub.add_parser("plan", help="build a roster")
    p.add_argument("--instance", type=Path, required=True)
    p.add_argument("--algo", default="tscg", choices=["tscg", "sph", "lgh"])
    p.add_argument("--node-limit", type=int, default=1000)
    p.add_argument("--preference-aware", action="store_true",
                   help="tscg: price preference penalties per crew class in stage 1 (exact, slower)")
    p.add_argument("--dive", action="store_true", help="tscg: price-and-dive when the integer gap stays open")
    p.add_argument("--metrics", type=Path, help="also write the metrics JSON here")
    p.add_argument("--export-network", type=Path, help="write the network edge list here")

    r = sub.add_parser("replan", help="repair a roster after a surge")
    r.add_argument("--instance", type=Path, required=True)
    r.add_argument("--roster", type=Path, required=True)
    r.add_argument("--scenario", type=Path, help="scenario JSON; generated from --seed when omitted")
    r.add_argument("--t-bar", type=int, default=690)
    r.add_argument("--surge-headway", type=int, default=2, help="headway of a generated surge (minutes)")
    r.add_argument("--algo", default="fpah", choices=["fpah", "fpah-n", "lgh-r"])
    r.add_argument("--metrics", type=Path)

    v = sub.add_parser("validate", help="check a roster against the operating rules")
    v.add_argument("--instance", type=Path, required=True)
    v.add_argument("--roster", type=Path, required=True)
    v.add_argument("--scenario", type=Path, help="validate in replanning mode against --original")
    v.add_argument("--original", type=Path)

    b = sub.add_parser("bench", help="run a benchmark batch")
    b.add_argument("--config", type=Path, required=True)
    b.add_argument("--repetitions", type=int)

    for s in (g, p, r, v, b):
        _common(s)
    return ap


def _emit(obj: dict, path: Path | None):
    text = json.dumps(obj, indent=1, sort_keys=True)
    if path:
        path.write_text(text + "\n")
    print(text)


def cmd_gen(a) -> int:
    if a.config:
        doc = json.loads(a.config.read_text())
        if isinstance(doc.get("crew"), dict):
            doc["crew"].setdefault("seed", a.seed or 0)
    elif a.preset == "shanghai":
        doc = shanghai_like_config(n_days=a.days or 3, n_r=a.n_r or 680, seed=a.seed or 0)
    else:
        doc = desk_config(a.seed or 0, n_r=a.n_r or 40, n_days=a.days or 2)
    inst = instance_from_dict(doc)
    out = a.out or Path("instance.json")
    save_instance(inst, out)
    print(json.dumps({"tasks": len(inst.tasks), "crew": len(inst.crew), "days": inst.n_days, "out": str(out)}))
    return EXIT_OK


def cmd_plan(a) -> int:
    inst = load_instance(a.instance)
    if a.export_network:
        a.export_network.write_text(build_network(inst).edge_list())
    res = run_plan(inst, a.algo, a.node_limit, preference_aware=a.preference_aware, dive=a.dive)
    save_roster(res.roster, inst, a.out or Path("roster.json"))
    rep = validate_roster(inst, res.roster)
    m = res.metrics()
    m["valid"] = rep.ok
    _emit(m, a.metrics)
    if not rep.ok:
        print(rep, file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def cmd_replan(a) -> int:
    inst = load_instance(a.instance)
    original = load_roster(a.roster)
    if not validate_roster(inst, original).ok:
        print("input roster is not valid", file=sys.stderr)
        return EXIT_INVALID
    sc = load_scenario(a.scenario) if a.scenario else surge_scenario(inst, a.seed or 0, a.t_bar,
                                                                                headway=a.surge_headway)
    res = run_replan(inst, original, sc, a.algo)
    save_roster(res.roster, inst, a.out or Path("replanned.json"))
    rep = validate_replan(inst, original, sc, res)
    m = res.metrics()
    m["valid"] = rep.ok
    m["scenario"] = sc.to_dict()
    _emit(m, a.metrics)
    if not rep.ok:
        print(rep, file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def cmd_validate(a) -> int:
    inst = load_instance(a.instance)
    roster = load_roster(a.roster)
    if a.scenario:
        if not a.original:
            raise UsageError("--scenario needs --original")
        sc = load_scenario(a.scenario)
        rep = validate_roster(apply_disruption(inst, sc).check_instance, roster,
                              ReplanMode(sc.day, sc.t_bar, load_roster(a.original)))
    else:
        rep = validate_roster(inst, roster)
    print(rep)
    return EXIT_OK if rep.ok else EXIT_INVALID


def cmd_bench(a) -> int:
    cfg = load_config(a.config)
    if a.repetitions:
        cfg["repetitions"] = a.repetitions
    if a.seed is not None:
        cfg["seed"] = a.seed
    rep = run_benchmark(cfg, threads=a.threads)
    out = a.out or Path(f"{cfg.get('name', 'bench')}.csv")
    rep.write(out)
    print(rep.to_csv(), end="")
    failed = [r for r in rep.rows if r["error"]]
    invalid = [r for r in rep.rows if not r["error"] and not r["valid"]]
    if invalid:
        return EXIT_INVALID
    return EXIT_SOLVER if failed else EXIT_OK


COMMANDS = {"gen": cmd_gen, "plan": cmd_plan, "replan": cmd_replan, "validate": cmd_validate, "bench": cmd_bench}


def main(argv=None) -> int:
    try:
        a = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"metrocrew: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=getattr(logging, a.log_level), format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[a.cmd](a)
    except (UsageError, InstanceError, FileNotFoundError, json.JSONDecodeError, ValueError) as e:
        print(f"metrocrew: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, NetworkError, AssignmentError) as e:
        print(f"metrocrew: solver failure: {e}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
