"""Rule checker for rosters, independent of the network model."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

from .model import Instance, TrainTask, enumerate_duty_frames
from .roster import PathStep, Roster, WORK_KINDS, steps_by_day

RULES = (
    "day-off", "sign-in/out", "train-service", "working-time", "rest-break", "meal-break",
    "qualification", "deadhead", "replanned-duty", "replanned-task", "assignment",
)


@dataclass(frozen=True)
class Violation:
    rule: str
    crew_id: int
    day: int | None
    detail: str


@dataclass(frozen=True)
class ReplanMode:
    day: int
    t_bar: int
    original: Roster


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def rules(self) -> set[tuple[str, int]]:
        return {(v.rule, v.crew_id) for v in self.violations}

    def __str__(self) -> str:
        if self.ok:
            return "feasible"
        return "\n".join(f"[{v.rule}] crew {v.crew_id} day {v.day}: {v.detail}" for v in self.violations)


def pass_time(task: TrainTask, instance: Instance, frac_from_a: float) -> float:
    line = instance.line(task.line)
    frac = frac_from_a if task.dep_depot == line.depots[0] else 1.0 - frac_from_a
    return task.dep_time + frac * (task.arr_time - task.dep_time)


def transfer_fracs(instance: Instance, l1: str, l2: str) -> list[tuple[float, float]]:
    out = []
    for f in instance.transfers:
        if (f.line_a, f.line_b) == (l1, l2):
            out.append((f.frac_a, f.frac_b))
        elif (f.line_a, f.line_b) == (l2, l1):
            out.append((f.frac_b, f.frac_a))
    return out


def _check_day(instance: Instance, rid: int, qual: frozenset, day: int, steps: list[PathStep],
               tasks: dict[int, TrainTask], frames: dict[int, int], out: list[Violation]) -> None:
    p = instance.params

    def bad(rule, msg):
        out.append(Violation(rule, rid, day, msg))

    duties = {s.duty for s in steps}
    if len(duties) != 1:
        bad("sign-in/out", f"steps span several duties {sorted(duties)}")
    duty = steps[0].duty
    a_u = frames.get(duty)
    if a_u is None:
        bad("sign-in/out", f"unknown duty frame {duty}")
        a_u = steps[0].t_from
    kinds = [s.arc_kind for s in steps]
    if kinds[0] != "signin" or kinds[-1] != "signout" or kinds.count("signin") != 1 or kinds.count("signout") != 1:
        bad("sign-in/out", "a working day must open with one sign-in and close with one sign-out")
    for s in steps:
        if s.arc_kind not in WORK_KINDS:
            bad("sign-in/out", f"unknown step kind {s.arc_kind!r}")
        if s.t_to <= s.t_from:
            bad("sign-in/out", f"non-positive duration step {s.arc_kind} at {s.t_from}")
        if s.arc_kind not in ("train", "deadhead") and s.depot_from != s.depot_to:
            bad("sign-in/out", f"{s.arc_kind} step changes depot")
        if s.t_from < a_u or s.t_to > a_u + p.H:
            bad("sign-in/out", f"{s.arc_kind} step outside duty frame [{a_u}, {a_u + p.H}]")
    for s1, s2 in zip(steps, steps[1:]):
        if s1.t_to != s2.t_from or s1.depot_to != s2.depot_from:
            bad("sign-in/out", f"discontinuity between {s1.arc_kind}@{s1.t_to}/{s1.depot_to} "
                               f"and {s2.arc_kind}@{s2.t_from}/{s2.depot_from}")
    first, last = steps[0], steps[-1]
    if first.arc_kind == "signin" and (first.t_from != a_u or first.duration != p.t_si):
        bad("sign-in/out", "sign-in must start at the frame start and last t_si")
    if last.arc_kind == "signout" and last.duration != p.t_so:
        bad("sign-in/out", "sign-out must last t_so")

    span = last.t_to - first.t_from
    if not p.t_min <= span <= p.t_max:
        bad("working-time", f"working span {span} outside [{p.t_min}, {p.t_max}]")

    trains = [s for s in steps if s.arc_kind == "train"]
    for s1, s2 in zip(trains, trains[1:]):
        if s2.t_from - s1.t_to < p.t_rt:
            bad("rest-break", f"tasks {s1.task}->{s2.task} separated by {s2.t_from - s1.t_to} < {p.t_rt}")

    meals = [s for s in steps if s.arc_kind == "meal"]
    if len(meals) != 1:
        bad("meal-break", f"{len(meals)} meal breaks (need exactly one)")
    for m in meals:
        if m.duration != p.t_ml or m.t_from < a_u + p.t_mb or m.t_to > a_u + p.t_me:
            bad("meal-break", f"meal [{m.t_from}, {m.t_to}] outside [{a_u + p.t_mb}, {a_u + p.t_me}] "
                              f"or not t_ml long")

    for s in steps:
        if s.arc_kind == "rest" and s.duration != p.t_rt:
            bad("rest-break", f"rest step of {s.duration} minutes")
        if s.arc_kind in ("train", "deadhead"):
            lines = {s.line} | ({s.line_to} if s.line_to is not None else set())
            if not lines <= qual:
                bad("qualification", f"{s.arc_kind} on {sorted(lines - qual)} outside qualification")
        if s.arc_kind == "train":
            k = tasks.get(s.task)
            if k is None or k.day != day or (k.dep_time, k.arr_time, k.dep_depot, k.arr_depot, k.line) != (
                    s.t_from, s.t_to, s.depot_from, s.depot_to, s.line):
                bad("train-service", f"train step does not match task {s.task}")
        if s.arc_kind == "deadhead":
            k1, k2 = tasks.get(s.task), tasks.get(s.task_to)
            ok = k1 is not None and k2 is not None and k1.day == day == k2.day
            if ok:
                ok = (k1.line == s.line and k2.line == s.line_to and k1.line != k2.line
                      and s.t_from == k1.dep_time and s.depot_from == k1.dep_depot
                      and s.t_to == k2.arr_time and s.depot_to == k2.arr_depot)
            if ok:
                ok = any(pass_time(k2, instance, fb) >= pass_time(k1, instance, fa) + p.t_tf
                         for fa, fb in transfer_fracs(instance, k1.line, k2.line))
            if not ok:
                bad("deadhead", f"invalid deadhead via tasks {s.task}->{s.task_to}")


def _clip(steps: Sequence[PathStep], t_bar: int) -> list[PathStep]:
    out = []
    for s in steps:
        if s.t_from >= t_bar:
            break
        if s.arc_kind == "idle" and s.t_to > t_bar:
            s = replace(s, t_to=t_bar)
        out.append(s)
    return out


def validate_roster(instance: Instance, roster: Roster, mode: ReplanMode | None = None) -> ValidationReport:
    """Check every operational rule; ``mode=None`` is planning mode."""
    p = instance.params
    frames = {f.index: f.start for f in enumerate_duty_frames(p, instance.horizon)}
    tasks = instance.task_by_id()
    out: list[Violation] = []
    crew = {r.id: r for r in instance.crew}
    for rid in crew:
        if rid not in roster.assignment:
            out.append(Violation("assignment", rid, None, "crew member has no duty list"))
    cover: dict[int, int] = {}
    for rid, steps in sorted(roster.assignment.items()):
        if rid not in crew:
            out.append(Violation("assignment", rid, None, "unknown crew member"))
            continue
        r = crew[rid]
        days = steps_by_day(steps)
        order = [s.day for s in steps]
        if order != sorted(order):
            out.append(Violation("sign-in/out", rid, None, "steps are not in day order"))
        for d, ds in sorted(days.items()):
            _check_day(instance, rid, r.qualification, d, ds, tasks, frames, out)
        for s in steps:
            if s.arc_kind == "train" and s.task is not None:
                cover[s.task] = cover.get(s.task, 0) + 1
        if mode is None:
            if len(days) > instance.max_work_days:
                out.append(Violation("day-off", rid, None,
                                     f"works {len(days)} days, limit {instance.max_work_days}"))
            n_dh = sum(1 for s in steps if s.arc_kind == "deadhead")
            if n_dh > p.n_tf:
                out.append(Violation("deadhead", rid, None, f"{n_dh} deadheads > {p.n_tf}"))
        else:
            orig = steps_by_day(mode.original.assignment.get(rid, ()))
            new_days = set(days)
            for d in sorted(set(orig) | new_days):
                o_steps, n_steps = orig.get(d, []), days.get(d, [])
                if d != mode.day:
                    if tuple(o_steps) != tuple(n_steps):
                        out.append(Violation("replanned-duty", rid, d, "duty changed outside the replanning day"))
                    continue
                o_duty = o_steps[0].duty if o_steps else None
                n_duty = n_steps[0].duty if n_steps else None
                if o_duty != n_duty:
                    out.append(Violation("replanned-duty", rid, d, f"duty frame {n_duty} differs from {o_duty}"))
                if _clip(o_steps, mode.t_bar) != _clip(n_steps, mode.t_bar):
                    out.append(Violation("replanned-task", rid, d,
                                         "trajectory before the replanning time was altered"))
    for k, n in sorted(cover.items()):
        task = tasks.get(k)
        if task is None:
            continue  # already reported as train-service mismatch
        if n > task.demand:
            out.append(Violation("train-service", -1, task.day, f"task {k} covered {n} times (demand {task.demand})"))
    return ValidationReport(out)
