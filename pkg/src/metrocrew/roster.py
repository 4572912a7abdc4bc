"""Duty-list steps, rosters and their JSON schema."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

from .model import Instance

WORK_KINDS = ("signin", "train", "rest", "meal", "idle", "deadhead", "signout")


@dataclass(frozen=True)
class PathStep:
    arc_kind: str
    day: int
    duty: int
    t_from: int
    t_to: int
    depot_from: str
    depot_to: str
    line: str | None = None
    task: int | None = None
    line_to: str | None = None
    task_to: int | None = None

    @property
    def duration(self) -> int:
        return self.t_to - self.t_from

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, d: dict) -> "PathStep":
        return cls(**d)


@dataclass
class Roster:
    assignment: dict[int, tuple[PathStep, ...]]
    labor: float = 0.0
    cancel: float = 0.0
    preference: float = 0.0

    @property
    def objective(self) -> float:
        return self.labor + self.cancel + self.preference


def merge_idles(steps: Sequence[PathStep]) -> tuple[PathStep, ...]:
    out: list[PathStep] = []
    for s in steps:
        if (out and s.arc_kind == "idle" and out[-1].arc_kind == "idle" and out[-1].t_to == s.t_from
                and out[-1].depot_to == s.depot_from and out[-1].day == s.day):
            out[-1] = replace(out[-1], t_to=s.t_to)
        elif s.t_to > s.t_from or s.arc_kind not in ("idle",):
            out.append(s)
    return tuple(out)


def steps_by_day(steps: Sequence[PathStep]) -> dict[int, list[PathStep]]:
    out: dict[int, list[PathStep]] = {}
    for s in steps:
        out.setdefault(s.day, []).append(s)
    return out


def covered_tasks(steps: Sequence[PathStep]) -> list[int]:
    return [s.task for s in steps if s.arc_kind == "train"]


def depot_events(steps: Sequence[PathStep]) -> list[str]:
    """Sign-in and sign-out depots, one entry per event."""
    out = []
    for s in steps:
        if s.arc_kind == "signin":
            out.append(s.depot_from)
        elif s.arc_kind == "signout":
            out.append(s.depot_to)
    return out


def step_labor(step: PathStep, instance: Instance) -> float:
    p = instance.params
    rate = p.c_w if step.arc_kind == "train" else p.c_r
    return rate * step.duration


def path_labor(steps: Sequence[PathStep], instance: Instance) -> float:
    return sum(step_labor(s, instance) for s in steps)


def preference_penalty(steps: Sequence[PathStep], preferred: frozenset, instance: Instance) -> float:
    return sum(instance.params.lambda_o for o in depot_events(steps) if o not in preferred)


def total_objective(instance: Instance, roster: Roster) -> tuple[float, float, float, float]:
    """(Obj, labor, cancel, preference) recomputed from the roster alone."""
    crew = {r.id: r for r in instance.crew}
    labor = 0.0
    pref = 0.0
    cov: dict[int, int] = {}
    for rid, steps in roster.assignment.items():
        labor += path_labor(steps, instance)
        pref += preference_penalty(steps, crew[rid].preferred_depots, instance)
        for k in covered_tasks(steps):
            cov[k] = cov.get(k, 0) + 1
    cancel = 0.0
    for k in instance.tasks:
        cancel += (k.demand - min(cov.get(k.id, 0), k.demand)) * k.penalty
    return labor + cancel + pref, labor, cancel, pref


def coverage(instance: Instance, roster: Roster) -> float:
    ids = {k.id for k in instance.tasks}
    if not ids:
        return 1.0
    done = {k for steps in roster.assignment.values() for k in covered_tasks(steps)}
    return len(done & ids) / len(ids)


def roster_to_json(roster: Roster, instance: Instance) -> list[dict]:
    crew = {r.id: r for r in instance.crew}
    out = []
    for rid in sorted(roster.assignment):
        steps = roster.assignment[rid]
        cost = path_labor(steps, instance) + preference_penalty(steps, crew[rid].preferred_depots, instance)
        out.append({"crew_id": rid, "path": [s.to_dict() for s in steps], "cost": cost})
    return out


def roster_from_json(doc: list[dict]) -> Roster:
    return Roster({int(e["crew_id"]): tuple(PathStep.from_dict(s) for s in e["path"]) for e in doc})


def save_roster(roster: Roster, instance: Instance, path: str | Path) -> None:
    Path(path).write_text(json.dumps(roster_to_json(roster, instance), indent=1))


def load_roster(path: str | Path) -> Roster:
    return roster_from_json(json.loads(Path(path).read_text()))
