"""Domain types, instance I/O and synthetic generators."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

T_BEGIN = 0
T_END = 1140  # 05:00 -> 24:00 in minutes


class InstanceError(ValueError):
    """Raised when an instance file is malformed or violates an invariant."""

    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where


@dataclass(frozen=True)
class Params:
    H: int = 540
    h: int = 120
    t_min: int = 530
    t_max: int = 540
    t_rt: int = 10
    t_ml: int = 45
    t_mb: int = 120
    t_me: int = 420
    t_si: int = 20
    t_so: int = 20
    t_tf: int = 5
    n_df: int = 1
    n_tf: int = 10
    lambda_o: float = 50.0
    c_w: float = 1.0
    c_r: float = 0.2
    lambda_multiplier: float = 4.0

    def check(self, where: str = "params") -> None:
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise InstanceError(f"{where}.{f.name}", "must be >= 0")
        if not self.t_min <= self.t_max <= self.H:
            raise InstanceError(where, "need t_min <= t_max <= H")
        if self.t_mb + self.t_ml > self.t_me:
            raise InstanceError(where, "need t_mb + t_ml <= t_me")
        if self.h <= 0:
            raise InstanceError(f"{where}.h", "slide interval must be positive")
        if self.t_ml <= 0 or self.t_rt <= 0:
            raise InstanceError(where, "meal and rest breaks must be positive")


@dataclass(frozen=True)
class Line:
    id: str
    depots: tuple[str, str]
    run_minutes: int
    headway_minutes: int
    service_window: tuple[int, int]


@dataclass(frozen=True)
class TransferStation:
    line_a: str
    line_b: str
    id: str = ""
    frac_a: float = 0.5
    frac_b: float = 0.5


@dataclass(frozen=True)
class TrainTask:
    id: int
    line: str
    dep_depot: str
    dep_time: int
    arr_depot: str
    arr_time: int
    penalty: float
    day: int
    urgent: bool = False
    demand: int = 1

    @property
    def duration(self) -> int:
        return self.arr_time - self.dep_time


@dataclass(frozen=True)
class DutyFrame:
    index: int
    start: int
    end: int


@dataclass(frozen=True)
class CrewMember:
    id: int
    qualification: frozenset
    preferred_depots: frozenset


@dataclass(frozen=True)
class Instance:
    n_days: int
    horizon: tuple[int, int]
    lines: tuple[Line, ...]
    transfers: tuple[TransferStation, ...]
    tasks: tuple[TrainTask, ...]
    crew: tuple[CrewMember, ...]
    params: Params = field(default_factory=Params)

    @property
    def days(self) -> range:
        return range(self.n_days)

    @property
    def max_work_days(self) -> int:
        # a horizon no longer than n_df days cannot hold a day off; the cap is then void
        if self.n_days <= self.params.n_df:
            return self.n_days
        return self.n_days - self.params.n_df

    def line(self, line_id: str) -> Line:
        return self._line_map()[line_id]

    def line_index(self, line_id: str) -> int:
        return self._line_pos()[line_id]

    def _line_map(self):
        m = self.__dict__.get("_lm")
        if m is None:
            m = {l.id: l for l in self.lines}
            object.__setattr__(self, "_lm", m)
        return m

    def _line_pos(self):
        m = self.__dict__.get("_lp")
        if m is None:
            m = {l.id: i for i, l in enumerate(self.lines)}
            object.__setattr__(self, "_lp", m)
        return m

    def task_by_id(self) -> dict[int, TrainTask]:
        m = self.__dict__.get("_tm")
        if m is None:
            m = {k.id: k for k in self.tasks}
            object.__setattr__(self, "_tm", m)
        return m

    def depot_line(self, depot: str) -> str:
        for l in self.lines:
            if depot in l.depots:
                return l.id
        raise KeyError(depot)

    def line_mask(self, line_ids: Iterable[str]) -> int:
        pos = self._line_pos()
        m = 0
        for l in line_ids:
            m |= 1 << pos[l]
        return m

    def with_tasks(self, tasks: Sequence[TrainTask]) -> "Instance":
        return replace(self, tasks=tuple(tasks))

    def with_crew(self, crew: Sequence[CrewMember]) -> "Instance":
        return replace(self, crew=tuple(crew))

    def validate(self) -> None:
        p = self.params
        p.check()
        if self.n_days < 1:
            raise InstanceError("days", "need at least one day")
        if p.n_df >= self.n_days and self.n_days > 1:
            raise InstanceError("params.n_df", "must be smaller than the number of days")
        tb, te = self.horizon
        if tb >= te:
            raise InstanceError("horizon", "empty day horizon")
        seen_lines = set()
        depots = set()
        for i, l in enumerate(self.lines):
            w = f"lines[{i}]"
            if l.id in seen_lines:
                raise InstanceError(w, f"duplicate line id {l.id!r}")
            seen_lines.add(l.id)
            if len(l.depots) != 2 or l.depots[0] == l.depots[1]:
                raise InstanceError(f"{w}.depots", "need two distinct depots")
            if depots & set(l.depots):
                raise InstanceError(f"{w}.depots", "depots must be unique to one line")
            depots |= set(l.depots)
            if l.run_minutes <= 0:
                raise InstanceError(f"{w}.run", "must be positive")
            if l.headway_minutes <= 0:
                raise InstanceError(f"{w}.headway", "must be positive")
        for i, f in enumerate(self.transfers):
            w = f"transfers[{i}]"
            if f.line_a == f.line_b:
                raise InstanceError(w, "transfer must join two different lines")
            if f.line_a not in seen_lines or f.line_b not in seen_lines:
                raise InstanceError(w, "unknown line")
            if not (0 <= f.frac_a <= 1 and 0 <= f.frac_b <= 1):
                raise InstanceError(w, "fractions must lie in [0, 1]")
        ids = set()
        lm = self._line_map()
        for i, k in enumerate(self.tasks):
            w = f"tasks[{i}] (id {k.id})"
            if k.id in ids:
                raise InstanceError(w, "duplicate task id")
            ids.add(k.id)
            if k.line not in lm:
                raise InstanceError(w, f"unknown line {k.line!r}")
            if k.dep_time >= k.arr_time:
                raise InstanceError(w, "departure must precede arrival")
            ld = lm[k.line].depots
            if {k.dep_depot, k.arr_depot} != set(ld):
                raise InstanceError(w, "depots must be the two ends of its line")
            if not 0 <= k.day < self.n_days:
                raise InstanceError(w, "day outside the planning horizon")
            if k.dep_time < tb or k.arr_time > te:
                raise InstanceError(w, "times outside the day horizon")
            if k.penalty <= 0:
                raise InstanceError(w, "cancel penalty must be positive")
            if k.demand < 1:
                raise InstanceError(w, "demand must be >= 1")
        cids = set()
        for i, r in enumerate(self.crew):
            w = f"crew[{i}] (id {r.id})"
            if r.id in cids:
                raise InstanceError(w, "duplicate crew id")
            cids.add(r.id)
            if not r.qualification or not r.qualification <= seen_lines:
                raise InstanceError(w, "qualification must be a nonempty set of known lines")
            ok_depots = {d for l in r.qualification for d in lm[l].depots}
            if not r.preferred_depots:
                raise InstanceError(w, "preferred depots must be nonempty")
            if not r.preferred_depots <= ok_depots:
                raise InstanceError(w, "preferred depots must lie on qualified lines")


# ---------------------------------------------------------------- generators


def task_penalty(dep: int, arr: int, params: Params) -> float:
    return params.lambda_multiplier * (arr - dep)


def generate_tasks(line: Line, day: int, params: Params, first_id: int = 0) -> list[TrainTask]:
    """Both directions at a fixed headway inside the line's service window."""
    s, e = line.service_window
    out = []
    if e < s:
        return out
    deps = range(s, e + 1, line.headway_minutes)
    a, b = line.depots
    nid = first_id
    for t in deps:
        for o, o2 in ((a, b), (b, a)):
            arr = t + line.run_minutes
            out.append(TrainTask(nid, line.id, o, t, o2, arr, task_penalty(t, arr, params), day))
            nid += 1
    return out


def perturb_timetable(tasks: Sequence[TrainTask], seed: int | None, params: Params | None = None,
                      horizon: tuple[int, int] = (T_BEGIN, T_END)) -> list[TrainTask]:
    """Shift every departure and arrival by an independent integer in {-1, 0, 1}.

    ``seed=None`` is the zero-perturbation mode.
    """
    if seed is None:
        return list(tasks)
    params = params or Params()
    rng = np.random.default_rng(seed)
    shifts = rng.integers(-1, 2, size=(len(tasks), 2))
    out = []
    tb, te = horizon
    for k, (d0, d1) in zip(tasks, shifts):
        dep = min(max(k.dep_time + int(d0), tb), te)
        arr = min(max(k.arr_time + int(d1), tb), te)
        if arr <= dep:
            dep, arr = k.dep_time, k.arr_time
        pen = task_penalty(dep, arr, params)
        if k.urgent:
            pen = k.penalty / k.duration * (arr - dep)
        out.append(replace(k, dep_time=dep, arr_time=arr, penalty=pen))
    return out


def generate_crew(n_r: int, instance: Instance, seed: int) -> list[CrewMember]:
    """40% of members get two random lines, the rest one; two random preferred depots."""
    rng = np.random.default_rng(seed)
    line_ids = [l.id for l in instance.lines]
    n_two = int(math.floor(0.4 * n_r + 0.5)) if len(line_ids) > 1 else 0
    two = set(rng.permutation(n_r)[:n_two].tolist())
    crew = []
    for r in range(n_r):
        if r in two:
            pick = rng.choice(len(line_ids), size=2, replace=False)
        else:
            pick = rng.choice(len(line_ids), size=1)
        q = frozenset(line_ids[i] for i in sorted(pick.tolist()))
        depots = sorted(d for l in q for d in instance.line(l).depots)
        if len(depots) <= 2:
            pref = frozenset(depots)
        else:
            pref = frozenset(depots[i] for i in rng.choice(len(depots), size=2, replace=False))
        crew.append(CrewMember(r, q, pref))
    return crew


def enumerate_duty_frames(params: Params, horizon: tuple[int, int] = (T_BEGIN, T_END)) -> list[DutyFrame]:
    tb, te = horizon
    if params.H > te - tb:
        return []
    out = []
    a = tb
    while a + params.H <= te:
        out.append(DutyFrame(len(out), a, a + params.H))
        a += params.h
    return out


# ---------------------------------------------------------------- file formats


def _params_from(d: dict | None) -> Params:
    d = dict(d or {})
    known = {f.name for f in fields(Params)}
    bad = set(d) - known
    if bad:
        raise InstanceError("params", f"unknown keys {sorted(bad)}")
    return Params(**d)


def _line_from(i: int, d: dict) -> Line:
    w = f"lines[{i}]"
    try:
        return Line(
            id=str(d["id"]),
            depots=tuple(str(x) for x in d.get("depots", (f"{d['id']}a", f"{d['id']}b"))),
            run_minutes=int(d["run"]),
            headway_minutes=int(d["headway"]),
            service_window=tuple(int(x) for x in d.get("window", (T_BEGIN, T_END - int(d["run"])))),
        )
    except KeyError as e:
        raise InstanceError(w, f"missing field {e.args[0]!r}") from None
    except (TypeError, ValueError) as e:
        raise InstanceError(w, str(e)) from None


def instance_from_dict(doc: dict) -> Instance:
    """Build and validate an instance from the JSON document schema."""
    if not isinstance(doc, dict):
        raise InstanceError("<root>", "expected an object")
    try:
        n_days = int(doc["days"])
    except (KeyError, TypeError, ValueError):
        raise InstanceError("days", "required integer") from None
    horizon = tuple(int(x) for x in doc.get("horizon", (T_BEGIN, T_END)))
    params = _params_from(doc.get("params"))
    lines = tuple(_line_from(i, d) for i, d in enumerate(doc.get("lines", [])))
    if not lines:
        raise InstanceError("lines", "need at least one line")
    transfers = []
    for i, d in enumerate(doc.get("transfers", [])):
        try:
            a, b = str(d["a"]), str(d["b"])
        except KeyError as e:
            raise InstanceError(f"transfers[{i}]", f"missing field {e.args[0]!r}") from None
        transfers.append(TransferStation(a, b, str(d.get("id", f"f_{a}_{b}")),
                                         float(d.get("frac_a", 0.5)), float(d.get("frac_b", 0.5))))
    base = Instance(n_days, horizon, lines, tuple(transfers), (), (), params)
    if doc.get("tasks") is not None:
        tasks = []
        for i, t in enumerate(doc["tasks"]):
            try:
                dep, arr = int(t["dep_time"]), int(t["arr_time"])
                pen = t.get("penalty")
                tasks.append(TrainTask(
                    int(t["id"]), str(t["line"]), str(t["dep_depot"]), dep, str(t["arr_depot"]), arr,
                    float(pen) if pen is not None else task_penalty(dep, arr, params),
                    int(t.get("day", 0)), bool(t.get("urgent", False)), int(t.get("demand", 1))))
            except KeyError as e:
                raise InstanceError(f"tasks[{i}]", f"missing field {e.args[0]!r}") from None
    else:
        tasks = generate_timetable(base)
        pert = doc.get("perturb")
        if pert is not None:
            tasks = perturb_timetable(tasks, int(pert["seed"]) if isinstance(pert, dict) else int(pert),
                                      params, horizon)
    base = base.with_tasks(tasks)
    crew_doc = doc.get("crew")
    if isinstance(crew_doc, dict):
        crew = generate_crew(int(crew_doc["n_r"]), base, int(crew_doc.get("seed", 0)))
    elif isinstance(crew_doc, list):
        crew = []
        for i, c in enumerate(crew_doc):
            try:
                crew.append(CrewMember(int(c["id"]), frozenset(str(x) for x in c["lines"]),
                                       frozenset(str(x) for x in c["depots"])))
            except KeyError as e:
                raise InstanceError(f"crew[{i}]", f"missing field {e.args[0]!r}") from None
    else:
        crew = []
    inst = base.with_crew(crew)
    inst.validate()
    return inst


def generate_timetable(instance: Instance) -> list[TrainTask]:
    tasks: list[TrainTask] = []
    for d in instance.days:
        for line in instance.lines:
            tasks.extend(generate_tasks(line, d, instance.params, first_id=len(tasks)))
    return tasks


def load_instance(path: str | Path) -> Instance:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise InstanceError(str(path), f"parse error: {e}") from None
    return instance_from_dict(doc)


def instance_to_dict(inst: Instance) -> dict:
    return {
        "days": inst.n_days,
        "horizon": list(inst.horizon),
        "params": asdict(inst.params),
        "lines": [{"id": l.id, "depots": list(l.depots), "run": l.run_minutes,
                   "headway": l.headway_minutes, "window": list(l.service_window)} for l in inst.lines],
        "transfers": [{"a": f.line_a, "b": f.line_b, "id": f.id, "frac_a": f.frac_a, "frac_b": f.frac_b}
                      for f in inst.transfers],
        "tasks": [{"id": k.id, "line": k.line, "dep_depot": k.dep_depot, "dep_time": k.dep_time,
                   "arr_depot": k.arr_depot, "arr_time": k.arr_time, "penalty": k.penalty, "day": k.day,
                   **({"urgent": True} if k.urgent else {}),
                   **({"demand": k.demand} if k.demand != 1 else {})} for k in inst.tasks],
        "crew": [{"id": r.id, "lines": sorted(r.qualification), "depots": sorted(r.preferred_depots)}
                 for r in inst.crew],
    }


def save_instance(inst: Instance, path: str | Path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=1))


# ---------------------------------------------------------------- presets


def shanghai_like_config(n_lines: int = 3, n_days: int = 3, n_r: int = 680, seed: int = 0) -> dict:
    """Generator config whose task volume matches the Shanghai rows (about 1,270 tasks/line over 3 days)."""
    runs = [62, 58, 66, 54, 70]
    heads = [5.4, 5.4, 5.4, 6.2, 5.4]
    lines = []
    for i in range(n_lines):
        run = runs[i]
        lines.append({"id": f"L{i + 1}", "depots": [f"L{i + 1}a", f"L{i + 1}b"], "run": run,
                      "headway": int(round(heads[i])), "window": [0, T_END - run]})
    transfers = [{"a": f"L{i + 1}", "b": f"L{j + 1}", "frac_a": 0.5, "frac_b": 0.5}
                 for i in range(n_lines) for j in range(i + 1, n_lines)]
    return {"days": n_days, "lines": lines, "transfers": transfers,
            "crew": {"n_r": n_r, "seed": seed}, "perturb": {"seed": seed}}


def desk_config(seed: int = 0, n_r: int = 40, n_days: int = 2) -> dict:
    """Two-line, two-day instance with about 200 tasks: the scale the benchmarks run at."""
    return {
        "days": n_days,
        "lines": [
            {"id": "L1", "depots": ["L1a", "L1b"], "run": 48, "headway": 46, "window": [0, 1080]},
            {"id": "L2", "depots": ["L2a", "L2b"], "run": 56, "headway": 46, "window": [0, 1080]},
        ],
        "transfers": [{"a": "L1", "b": "L2", "frac_a": 0.5, "frac_b": 0.5}],
        "crew": {"n_r": n_r, "seed": seed},
        "perturb": {"seed": seed},
    }
