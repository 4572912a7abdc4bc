from dataclasses import replace

import numpy as np
import pytest

from metrocrew.heuristics import sph
from metrocrew.htsn import A_TRAIN, NetworkView, build_network
from metrocrew.matching import QualificationUniverse, check_hall, requirement_set
from metrocrew.model import CrewMember, Line
from metrocrew.planner import Column, build_initial_paths, plan, price, reduced_cost
from metrocrew.pulse import Limits, solve_cspp
from metrocrew.roster import PathStep, Roster, total_objective
from metrocrew.validate import validate_roster
from conftest import small_instance
from oracles import random_toy, toy_optimum


def _one_member(tasks, n=1):
    crew = [CrewMember(i, frozenset({"L1"}), frozenset({"A", "B"})) for i in range(n)]
    return small_instance(tasks, crew=crew)


def test_initial_path_covers_reachable_task():
    inst = _one_member([("L1", "A", 100, 140), ("L1", "B", 160, 200)])
    cols = build_initial_paths(build_network(inst))
    assert len(cols) == 1 and cols[0].cost < 0 and sorted(cols[0].tasks) == [0, 1]


def test_initial_paths_do_not_share_tasks():
    inst = _one_member([("L1", "A", 100, 140), ("L1", "B", 160, 200)], n=2)
    cols = build_initial_paths(build_network(inst))
    assert len(cols) == 1  # the second member has nothing left worth working for


def test_initial_paths_are_feasible(desk0):
    net = build_network(desk0)
    cols = build_initial_paths(net)
    seen = [k for c in cols for k in c.tasks]
    assert len(seen) == len(set(seen))
    U = QualificationUniverse.from_crew(desk0.crew)
    counts = {}
    for c in cols:
        counts[c.req] = counts.get(c.req, 0) + 1
    assert check_hall(counts, U.pools, U.families)


def _price_setup():
    inst = _one_member([("L1", "A", 100, 140), ("L1", "B", 160, 200)])
    net = build_network(inst)
    U = QualificationUniverse.from_crew(inst.crew)
    return inst, net, U


def test_zero_duals_price_raw_cost():
    inst, net, U = _price_setup()
    cols, sigma = price(net, np.zeros(len(U.families)), np.zeros(len(inst.tasks)), U)
    best = solve_cspp(NetworkView(net), Limits.planning(inst))
    assert sigma == pytest.approx(best.cost) == pytest.approx(cols[0].cost)


def test_negative_task_dual_is_avoided():
    inst = _one_member([("L1", "A", 100, 140), ("L1", "B", 160, 200), ("L1", "A", 220, 260)])
    net = build_network(inst)
    U = QualificationUniverse.from_crew(inst.crew)
    cols, _ = price(net, np.zeros(len(U.families)), np.zeros(3), U)
    assert sorted(cols[0].tasks) == [0, 1, 2]
    cols, _ = price(net, np.zeros(len(U.families)), np.array([-1000.0, 0.0, 0.0]), U)
    assert sorted(cols[0].tasks) == [1, 2]


def test_sigma_recomputed():
    inst, net, U = _price_setup()
    rng = np.random.default_rng(1)
    mu = -rng.uniform(0, 30, len(U.families))
    nu = -rng.uniform(0, 100, len(inst.tasks))
    cols, sigma = price(net, mu, nu, U)
    c = cols[0]
    arc_sum = sum(net.cost[a] for a in c.arcs if a < net.n_arcs)
    fam = sum(mu[i] for i, S in enumerate(U.families) if requirement_set(c.steps) in S)
    served = sum(nu[net.task[a]] for a in c.arcs if a < net.n_arcs and net.kind[a] == A_TRAIN)
    assert sigma == pytest.approx(arc_sum - fam - served) == pytest.approx(reduced_cost(c, mu, nu, U))


def test_toy_four_tasks_two_crew():
    for seed in range(8):
        inst = random_toy(seed, n_tasks=4, n_crew=2)
        neutral = replace(inst, crew=tuple(replace(r, preferred_depots=frozenset({"A", "B"})) for r in inst.crew))
        assert plan(neutral).obj == pytest.approx(toy_optimum(neutral), abs=1e-6)
        assert plan(inst, preference_aware=True, dive=True).obj == pytest.approx(toy_optimum(inst), abs=1e-6)


def test_nothing_coverable():
    lines = (Line("L1", ("A", "B"), 40, 30, (0, 560)), Line("L2", ("C", "D"), 40, 30, (0, 560)))
    inst = small_instance([("L2", "C", 100, 140), ("L2", "D", 200, 240)], lines=lines,
                          crew=[CrewMember(0, frozenset({"L1"}), frozenset({"A"}))])
    res = plan(inst)
    assert res.obj == pytest.approx(sum(k.penalty for k in inst.tasks))
    assert res.roster.assignment == {0: ()} and res.cvg == 0


def test_total_objective_examples():
    inst = small_instance([("L1", "A", 30 + 50 * i, 80 + 50 * i) for i in range(10)],
                          crew=[CrewMember(0, frozenset({"L1"}), frozenset({"A"}))])
    assert total_objective(inst, Roster({0: ()})) == (2000.0, 0.0, 2000.0, 0.0)
    # a lone sign-in at the unpreferred depot B
    p = inst.params
    day = (PathStep("signin", 0, 0, 0, 20, "B", "B"), PathStep("idle", 0, 0, 20, 130, "B", "B"),
           PathStep("meal", 0, 0, 130, 175, "B", "B"), PathStep("idle", 0, 0, 175, 510, "B", "B"),
           PathStep("signout", 0, 0, 510, 530, "B", "B"))
    obj, labor, cancel, pref = total_objective(inst, Roster({0: day}))
    assert labor == pytest.approx(p.c_r * 530) and pref == 100.0  # sign-in and sign-out both at B
    only_in = day[:-1] + (replace(day[-1], depot_from="A", depot_to="A"),)
    assert total_objective(inst, Roster({0: only_in}))[3] == 50.0


@pytest.mark.parametrize("seed", range(4))
def test_bounds_chain_on_toys(seed):
    inst = random_toy(100 + seed)
    res = plan(inst)
    lp = res.iterations[-1].rlmp_obj
    assert lp <= res.stage1 + 1e-6
    assert lp <= toy_optimum(inst) + 1e-6
    assert res.iterations[-1].sigma >= -1e-9


def test_desk_plan(desk0, desk0_plan):
    res = desk0_plan
    objs = [r.rlmp_obj for r in res.iterations]
    assert all(b <= a + 1e-6 for a, b in zip(objs, objs[1:]))
    assert res.iterations[-1].sigma >= -1e-9
    assert all(abs(r.duality_gap) <= 1e-6 for r in res.iterations)
    assert validate_roster(desk0, res.roster).ok
    obj, labor, cancel, pref = total_objective(desk0, res.roster)
    assert obj == pytest.approx(res.obj, abs=1e-6)
    assert res.obj == pytest.approx(res.stage1 + res.stage2, abs=1e-6)
    assert res.obj <= sph(desk0).obj
    U = QualificationUniverse.from_crew(desk0.crew)
    counts = {}
    for steps in res.roster.assignment.values():
        if steps:
            q = requirement_set(steps)
            counts[q] = counts.get(q, 0) + 1
    assert check_hall(counts, U.pools, U.families)
