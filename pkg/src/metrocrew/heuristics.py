"""Baselines: sequential shortest paths (SPH), rule-based legs (LGH) and their replanning variant (LGH-R)."""

from __future__ import annotations

import logging
import time
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .htsn import A_FILTER, NetworkView, build_network, decode_path, path_tasks, preference_surcharge
from .model import Instance, Params, TrainTask, enumerate_duty_frames
from .planner import PlanResult, finish_plan
from .pulse import EPS, Limits, solve_cspp
from .replanner import (DisruptionScenario, ReplanResult, affected_members, apply_disruption, finish_replan,
                        splice)
from .roster import PathStep, Roster, depot_events, path_labor

log = logging.getLogger(__name__)


# ------------------------------------------------------------------ SPH

def greedy_line(instance: Instance, qualification: Iterable[str], uncovered: set[int]) -> str:
    counts = {l: 0 for l in qualification}
    for k in instance.tasks:
        if k.id in uncovered and k.line in counts:
            counts[k.line] += 1
    return min(counts, key=lambda l: (-counts[l], instance.line_index(l)))


def sph(instance: Instance, net=None) -> PlanResult:
    """Member by member: best path entering on the busiest qualified line."""
    t0 = time.perf_counter()
    net = net or build_network(instance)
    limits = Limits.planning(instance)
    base = NetworkView(net)
    base.disable([])
    uncovered = {k.id for k in instance.tasks}
    filt = np.flatnonzero(net.kind == A_FILTER)
    paths = {}
    for r in sorted(instance.crew, key=lambda r: r.id):
        line = greedy_line(instance, r.qualification, uncovered)
        ok = set(instance.line(line).depots)
        view = base.copy(allowed_lines=instance.line_mask(r.qualification))
        view.disable([a for a in filt if net.depots[net.depot[a]] not in ok])
        view.add_costs(np.arange(net.n_arcs), preference_surcharge(net, r.preferred_depots))
        res = solve_cspp(view, limits)
        if res is None or res.cost >= -EPS:
            paths[r.id] = ()
            continue
        paths[r.id] = decode_path(net, res.arcs)
        for k in path_tasks(net, res.arcs):
            base.disable(net.task_arcs[k])
            uncovered.discard(instance.tasks[k].id)
    return finish_plan(instance, Roster(paths), t0)


# ------------------------------------------------------------------ rule-based legs

@dataclass
class LegState:
    day: int
    duty: int
    a_u: int
    t: int
    depot: str
    arrived: bool = False   # last step was a train ending at t
    meal: bool = False
    steps: list = field(default_factory=list)
    tasks: list = field(default_factory=list)


def can_finish(p: Params, a: int, t: int, meal: bool) -> bool:
    if not meal:
        ms = max(t, a + p.t_mb)
        if ms + p.t_ml > a + p.t_me:
            return False
        t = ms + p.t_ml
    return max(t, a + p.t_min - p.t_so) <= a + p.t_max - p.t_so


def _wait(st: LegState, until: int):
    if until > st.t:
        st.steps.append(PathStep("idle", st.day, st.duty, st.t, until, st.depot, st.depot))
        st.t = until


def _train(st: LegState, k: TrainTask, p: Params):
    if st.arrived:
        st.steps.append(PathStep("rest", st.day, st.duty, st.t, st.t + p.t_rt, st.depot, st.depot))
        st.t += p.t_rt
    _wait(st, k.dep_time)
    st.steps.append(PathStep("train", st.day, st.duty, k.dep_time, k.arr_time, k.dep_depot,
                             k.arr_depot, line=k.line, task=k.id))
    st.t, st.depot, st.arrived = k.arr_time, k.arr_depot, True
    st.tasks.append(k)


def _meal(st: LegState, p: Params):
    ms = max(st.t, st.a_u + p.t_mb)
    if ms + p.t_ml > st.a_u + p.t_me:
        raise ValueError("meal window missed")
    _wait(st, ms)
    st.steps.append(PathStep("meal", st.day, st.duty, ms, ms + p.t_ml, st.depot, st.depot))
    st.t, st.meal, st.arrived = ms + p.t_ml, True, False


def _signout(st: LegState, p: Params):
    so = max(st.t, st.a_u + p.t_min - p.t_so)
    if so > st.a_u + p.t_max - p.t_so:
        raise ValueError("sign-out window missed")
    _wait(st, so)
    st.steps.append(PathStep("signout", st.day, st.duty, so, so + p.t_so, st.depot, st.depot))


def extend_leg(st: LegState, p: Params, pool: dict[str, list[TrainTask]], taken: Callable[[TrainTask], bool],
               key: Callable[[TrainTask], tuple]) -> LegState:
    """Append tasks picked by ``key`` among those keeping the duty completable, then meal and sign-out."""
    a = st.a_u
    hi = a + min(p.H, p.t_max) - p.t_so
    while True:
        ready = st.t + (p.t_rt if st.arrived else 0)
        cand = [k for k in pool.get(st.depot, ()) if k.dep_time >= ready and k.arr_time <= hi
                and not taken(k) and can_finish(p, a, k.arr_time, st.meal)]
        if cand:
            _train(st, min(cand, key=key), p)
        elif not st.meal:
            _meal(st, p)
        else:
            _signout(st, p)
            return st


def fresh_leg(p: Params, day: int, duty: int, a_u: int, depot: str) -> LegState:
    s = PathStep("signin", day, duty, a_u, a_u + p.t_si, depot, depot)
    return LegState(day, duty, a_u, a_u + p.t_si, depot, steps=[s])


def leg_gain(instance: Instance, st: LegState, preferred) -> float:
    """Objective decrease from adding this duty (covered penalties minus labor and preference)."""
    p = instance.params
    return (sum(k.penalty for k in st.tasks) - path_labor(st.steps, instance)
            - p.lambda_o * sum(1 for o in depot_events(st.steps) if o not in preferred))


def _pools(tasks: Sequence[TrainTask], day: int) -> dict[str, list[TrainTask]]:
    pool: dict[str, list[TrainTask]] = {}
    for k in sorted(tasks, key=lambda k: (k.dep_time, k.id)):
        if k.day == day:
            pool.setdefault(k.dep_depot, []).append(k)
    return pool


def _meal_fits(p: Params, a: int, t: int, until: int) -> bool:
    ms = max(t, a + p.t_mb)
    return ms + p.t_ml <= min(until, a + p.t_me)


def longest_leg(p: Params, day: int, duty: int, a: int, depot: str, tasks: Sequence[TrainTask]):
    """Longest feasible chain of tasks for one duty starting at ``depot``, as a finished LegState.

    Exact by dynamic programming over (task, meal taken); ties go to the
    earliest departing successor. Returns None when no task fits.
    """
    hi = a + min(p.H, p.t_max) - p.t_so
    t0 = a + p.t_si
    ks = sorted((k for k in tasks if k.dep_time >= t0 and k.arr_time <= hi), key=lambda k: (k.dep_time, k.id))
    n = len(ks)
    NEG = -1
    best = [[NEG, NEG] for _ in range(n)]   # further tasks after k with meal state m
    nxt: list[list] = [[None, None] for _ in range(n)]
    # successors of a task form a time suffix of its arrival depot's list, so
    # per-depot suffix maxima (earliest index on ties) replace the pair scan
    by_depot: dict[str, list[int]] = {}
    for j, k in enumerate(ks):
        by_depot.setdefault(k.dep_depot, []).append(j)
    pos = {j: (o, i) for o, js in by_depot.items() for i, j in enumerate(js)}
    deps = {o: [ks[j].dep_time for j in js] for o, js in by_depot.items()}
    suf = {o: [[(NEG, n), (NEG, n)] for _ in range(len(js) + 1)] for o, js in by_depot.items()}

    def query(o, t, m):
        if o not in suf:
            return NEG, n
        return suf[o][bisect_left(deps[o], t)][m]

    last_meal = a + p.t_me - p.t_ml
    for i in range(n - 1, -1, -1):
        k = ks[i]
        o = k.arr_depot
        for m in (0, 1):
            if can_finish(p, a, k.arr_time, bool(m)):
                best[i][m] = 0
            v, j = query(o, k.arr_time + p.t_rt, m)
            cands = [(v, j, 0)] if v >= 0 else []
            if m == 0 and max(k.arr_time, a + p.t_mb) <= last_meal:
                v, j = query(o, max(k.arr_time, a + p.t_mb) + p.t_ml, 1)
                if v >= 0:
                    cands.append((v, j, 1))
            if cands:
                v, j, meal = min(cands, key=lambda c: (-c[0], c[1], c[2]))
                if v + 1 > best[i][m]:
                    best[i][m], nxt[i][m] = v + 1, (j, bool(meal))
        od, pi = pos[i]
        row, after = suf[od][pi], suf[od][pi + 1]
        for m in (0, 1):
            row[m] = (best[i][m], i) if best[i][m] >= 0 and best[i][m] >= after[m][0] else after[m]
    first = None
    for j, k in enumerate(ks):
        if k.dep_depot != depot:
            continue
        for meal_first in (False, True):
            m = 1 if meal_first else 0
            if best[j][m] < 0 or (meal_first and not _meal_fits(p, a, t0, k.dep_time)):
                continue
            if first is None or best[j][m] + 1 > first[0]:
                first = (best[j][m] + 1, j, meal_first)
    if first is None:
        return None
    st = fresh_leg(p, day, duty, a, depot)
    _, j, meal = first
    while True:
        if meal:
            _meal(st, p)
        _train(st, ks[j], p)
        step = nxt[j][1 if st.meal else 0]
        if step is None:
            break
        j, meal = step
    if not st.meal:
        _meal(st, p)
    _signout(st, p)
    return st


def lgh(instance: Instance) -> PlanResult:
    """Members in id order; each takes the longest single-line leg on its busiest remaining days."""
    t0 = time.perf_counter()
    p = instance.params
    frames = enumerate_duty_frames(p, instance.horizon)
    open_tasks = {k.id: k for k in instance.tasks}
    paths = {}
    for r in sorted(instance.crew, key=lambda r: r.id):
        days: dict[int, list[PathStep]] = {}
        while len(days) < instance.max_work_days:
            left = [d for d in instance.days if d not in days]
            if not left:
                break
            count = {d: 0 for d in left}
            for k in open_tasks.values():
                if k.day in count and k.line in r.qualification:
                    count[k.day] += 1
            d = min(left, key=lambda d: (-count[d], d))
            if count[d] == 0:
                break
            best = None
            for fr in frames:
                for line in sorted(r.qualification, key=instance.line_index):
                    pool = [k for k in open_tasks.values() if k.day == d and k.line == line]
                    for o in instance.line(line).depots:
                        st = longest_leg(p, d, fr.index, fr.start, o, pool)
                        if st is not None and (best is None or len(st.tasks) > len(best.tasks)):
                            best = st
            if best is None:
                days[d] = []
                continue
            days[d] = best.steps
            for k in best.tasks:
                del open_tasks[k.id]
        paths[r.id] = tuple(s for d in sorted(days) for s in days[d])
    return finish_plan(instance, Roster(paths), t0)


def lgh_r(instance: Instance, original: Roster, sc: DisruptionScenario) -> ReplanResult:
    """Greedy continuation from each resumption point, urgent and high-penalty tasks first, no deadheads."""
    t0 = time.perf_counter()
    p = instance.params
    dis = apply_disruption(instance, sc)
    a1, a2 = affected_members(instance, original, sc)
    pool = _pools(dis.tasks, sc.day)
    left = {k.id: k.demand for k in dis.tasks}
    taken = lambda k: left[k.id] <= 0
    urgent_first = lambda k: (-k.penalty, k.dep_time, k.id)
    assignment = dict(original.assignment)
    members, fallbacks = [], []
    for r, res in a1 + a2:
        members.append(r.id)
        qpool = {o: [k for k in ks if k.line in r.qualification] for o, ks in pool.items()}
        try:
            if res.on_duty:
                st = LegState(sc.day, res.duty, res.a_u, res.time, res.depot, res.kind == "arrive",
                              res.meals > 0, list(res.prefix))
                st = extend_leg(st, p, qpool, taken, urgent_first)
            else:
                best = None
                for line in sorted(r.qualification, key=instance.line_index):
                    for o in instance.line(line).depots:
                        cand = extend_leg(fresh_leg(p, sc.day, res.duty, res.a_u, o), p, qpool, taken,
                                          urgent_first)
                        g = leg_gain(instance, cand, r.preferred_depots)
                        if best is None or g > best[0] + EPS:
                            best = (g, cand)
                st = best[1]
        except ValueError as e:
            log.warning("member %d: greedy continuation failed (%s), keeping the original duty", r.id, e)
            fallbacks.append(r.id)
            continue
        assignment[r.id] = splice(original.assignment[r.id], sc.day, st.steps)
        for k in st.tasks:
            left[k.id] -= 1
    return finish_replan(instance, dis, original, assignment, members, t0, fallbacks)
