"""Disruption scenarios and sequential path adjustment on restricted subnetworks."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .htsn import (A_DEADHEAD, ExtraPoint, NetworkView, Resumption, build_network,
                   build_restricted_subnetwork, decode_path, path_tasks, preference_surcharge,
                   resumption_point)
from .model import Instance, InstanceError, TrainTask, enumerate_duty_frames, task_penalty
from .pulse import Limits, solve_cspp
from .roster import PathStep, Roster, merge_idles, step_labor, steps_by_day
from .validate import ReplanMode, validate_roster

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DisruptionScenario:
    day: int
    t_bar: int
    line: str
    window: tuple[int, int]
    headway: int = 2
    penalty_mult: float = 3.0
    theta: int = 1
    seed: int = 0

    def check(self, instance: Instance) -> None:
        tb, te = instance.horizon
        if not 0 <= self.day < instance.n_days:
            raise InstanceError("scenario.day", "outside the planning horizon")
        if not tb <= self.t_bar <= te:
            raise InstanceError("scenario.t_bar", "outside the day horizon")
        if self.line not in {l.id for l in instance.lines}:
            raise InstanceError("scenario.line", f"unknown line {self.line!r}")
        s, e = self.window
        if e < s or s < self.t_bar:
            raise InstanceError("scenario.window", "window must start at or after t_bar")
        if self.headway <= 0 or self.theta < 1 or self.penalty_mult <= 0:
            raise InstanceError("scenario", "headway, theta and penalty_mult must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "DisruptionScenario":
        try:
            return cls(int(d["day"]), int(d["t_bar"]), str(d["line"]), tuple(int(x) for x in d["window"]),
                       int(d.get("headway", 2)), float(d.get("penalty_mult", 3.0)), int(d.get("theta", 1)),
                       int(d.get("seed", 0)))
        except KeyError as e:
            raise InstanceError("scenario", f"missing field {e.args[0]!r}") from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        return d


def surge_scenario(instance: Instance, seed: int, t_bar: int, day: int = 0, theta: int = 1,
                   offset: tuple[int, int] = (0, 30), headway: int = 2) -> DisruptionScenario:
    """Random surge on one line: window [t_bar + offset, t_bar + duration], duration in [60, 180]."""
    rng = np.random.default_rng(seed)
    line = instance.lines[int(rng.integers(len(instance.lines)))].id
    duration = int(rng.integers(60, 181))
    offset = int(rng.integers(offset[0], min(offset[1], duration - 1) + 1))
    end = min(t_bar + duration, instance.horizon[1])
    return DisruptionScenario(day, t_bar, line, (min(t_bar + offset, end), end), headway=headway, theta=theta,
                              seed=seed)


def load_scenario(path) -> DisruptionScenario:
    return DisruptionScenario.from_dict(json.loads(Path(path).read_text()))


@dataclass
class Disruption:
    scenario: DisruptionScenario
    tasks: tuple[TrainTask, ...]     # replanned task set, urgent ones carry their demand
    replan_instance: Instance        # tasks = the replanned set only
    check_instance: Instance         # original tasks plus injected ones, for validation

    @property
    def urgent(self) -> list[TrainTask]:
        return [k for k in self.tasks if k.urgent]


def apply_disruption(instance: Instance, sc: DisruptionScenario) -> Disruption:
    """Tasks departing on/after t_bar that day, plus urgent departures at the surge headway.

    Grid departures cover the half-open window [s, e) in both directions; an
    original surge-line task leaving at a grid slot is replaced by its urgent
    copy, the rest of the timetable is kept.
    """
    sc.check(instance)
    p = instance.params
    line = instance.line(sc.line)
    base = [k for k in instance.tasks if k.day == sc.day and k.dep_time >= sc.t_bar]
    nid = max((k.id for k in instance.tasks), default=-1) + 1
    s, e = sc.window
    slots = {}
    for t in range(s, e, sc.headway):
        if t + line.run_minutes > instance.horizon[1]:
            break
        for o, o2 in ((line.depots[0], line.depots[1]), (line.depots[1], line.depots[0])):
            slots[(o, t)] = o2
    kept = [k for k in base if not (k.line == sc.line and (k.dep_depot, k.dep_time) in slots)]
    urgent = []
    for (o, t), o2 in sorted(slots.items(), key=lambda kv: (kv[0][1], line.depots.index(kv[0][0]))):
        arr = t + line.run_minutes
        urgent.append(TrainTask(nid, sc.line, o, t, o2, arr, sc.penalty_mult * task_penalty(t, arr, p),
                                sc.day, urgent=True, demand=sc.theta))
        nid += 1
    tasks = tuple(sorted(kept + urgent, key=lambda k: (k.dep_time, k.line, k.dep_depot, k.id)))
    return Disruption(sc, tasks, instance.with_tasks(tasks), instance.with_tasks(list(instance.tasks) + urgent))


@dataclass
class ReplanResult:
    roster: Roster
    obj: float
    labor: float
    cancel: float
    pref: float
    cvg: float
    cvg_u: float
    wall_time_s: float = 0.0
    replanned: list[int] = field(default_factory=list)
    fallbacks: list[int] = field(default_factory=list)

    def metrics(self) -> dict:
        return {"obj": round(self.obj, 6), "labor": round(self.labor, 6), "cancel": round(self.cancel, 6),
                "pref": round(self.pref, 6), "cvg": round(self.cvg, 6), "cvg_u": round(self.cvg_u, 6),
                "iterations": len(self.replanned), "wall_time_s": round(self.wall_time_s, 3)}


def affected_members(instance: Instance, roster: Roster, sc: DisruptionScenario):
    """(on-duty members, later sign-ins) with their resumption points, in processing order."""
    p = instance.params
    frames = {f.index: f.start for f in enumerate_duty_frames(p, instance.horizon)}
    a1, a2 = [], []
    for r in sorted(instance.crew, key=lambda r: r.id):
        day = steps_by_day(roster.assignment.get(r.id, ())).get(sc.day, [])
        if not day:
            continue
        res = resumption_point(day, sc.t_bar, frames[day[0].duty], p)
        if res is None:
            continue
        (a1 if res.on_duty else a2).append((r, res))
    a1.sort(key=lambda x: (-(x[1].a_u + p.H - max(sc.t_bar, x[1].time)), x[0].id))
    a2.sort(key=lambda x: (x[1].a_u, x[0].id))
    return a1, a2


def splice(original: Sequence[PathStep], day: int, new_day: Sequence[PathStep]) -> tuple[PathStep, ...]:
    before = [s for s in original if s.day < day]
    after = [s for s in original if s.day > day]
    return tuple(before) + merge_idles(list(new_day)) + tuple(after)


def replan_metrics(instance: Instance, dis: Disruption, roster: Roster, members: Sequence[int]):
    """(Obj, labor, cancel, pref, Cvg, Cvg_u) over the part of day d-bar after t-bar."""
    p = instance.params
    sc = dis.scenario
    crew = {r.id: r for r in instance.crew}
    labor = pref = 0.0
    cov: dict[int, int] = {}
    ids = {k.id for k in dis.tasks}
    for rid, steps in roster.assignment.items():
        for s in steps:
            if s.arc_kind == "train" and s.task in ids:
                cov[s.task] = cov.get(s.task, 0) + 1
    for rid in members:
        for s in roster.assignment.get(rid, ()):
            if s.day != sc.day:
                continue
            span = s.t_to - max(s.t_from, sc.t_bar)
            if span > 0:
                labor += step_labor(s, instance) * span / s.duration
            if s.arc_kind in ("signin", "signout") and s.t_from >= sc.t_bar:
                o = s.depot_from if s.arc_kind == "signin" else s.depot_to
                if o not in crew[rid].preferred_depots:
                    pref += p.lambda_o
    cancel = sum((k.demand - min(cov.get(k.id, 0), k.demand)) * k.penalty for k in dis.tasks)
    cvg = sum(1 for k in dis.tasks if cov.get(k.id, 0) > 0) / max(len(dis.tasks), 1)
    urg = dis.urgent
    tot = sum(k.demand for k in urg)
    cvg_u = sum(min(cov.get(k.id, 0), k.demand) for k in urg) / tot if tot else 1.0
    return labor + cancel + pref, labor, cancel, pref, cvg, cvg_u


def finish_replan(instance, dis, original, assignment, members, t0, fallbacks=()):
    roster = Roster(assignment)
    obj, labor, cancel, pref, cvg, cvg_u = replan_metrics(instance, dis, roster, members)
    roster.labor, roster.cancel, roster.preference = labor, cancel, pref
    return ReplanResult(roster, obj, labor, cancel, pref, cvg, cvg_u, time.perf_counter() - t0,
                        list(members), list(fallbacks))


def replan(instance: Instance, original: Roster, sc: DisruptionScenario, deadheads: bool = True) -> ReplanResult:
    """Members resume from where they are at t_bar, one restricted search each.

    ``deadheads=False`` is the no-deadhead ablation.
    """
    t0 = time.perf_counter()
    dis = apply_disruption(instance, sc)
    a1, a2 = affected_members(instance, original, sc)
    extra = [ExtraPoint(sc.day, res.duty, res.depot, res.time, res.kind) for _, res in a1]
    net = build_network(dis.replan_instance, days=[sc.day], extra_points=extra)
    base = NetworkView(net)
    base.disable([])
    if not deadheads:
        base.disable(np.flatnonzero(net.kind == A_DEADHEAD))
    demand = np.array([k.demand for k in dis.replan_instance.tasks], dtype=np.int64)
    assignment = dict(original.assignment)
    members, fallbacks = [], []
    limits = Limits.replanning()
    for r, res in a1 + a2:
        members.append(r.id)
        view = build_restricted_subnetwork(net, res, sc.day, r.qualification, base)
        view.add_costs(np.arange(net.n_arcs), preference_surcharge(net, r.preferred_depots))
        found = solve_cspp(view, limits)
        if found is None:
            log.warning("member %d: no replanned path, keeping the original duty", r.id)
            fallbacks.append(r.id)
            continue
        suffix = decode_path(net, found.arcs)
        assignment[r.id] = splice(original.assignment[r.id], sc.day, list(res.prefix) + list(suffix))
        for k in path_tasks(net, found.arcs):
            demand[k] -= 1
            if demand[k] <= 0:
                base.disable(net.task_arcs[k])
    return finish_replan(instance, dis, original, assignment, members, t0, fallbacks)


def validate_replan(instance: Instance, original: Roster, sc: DisruptionScenario, result: ReplanResult):
    dis = apply_disruption(instance, sc)
    return validate_roster(dis.check_instance, result.roster, ReplanMode(sc.day, sc.t_bar, original))
