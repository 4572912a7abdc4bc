"""Two-stage column generation: path selection by CG + RIP, then crew assignment."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .htsn import (A_TRAIN, Network, NetworkView, build_network, decode_path, path_lines, path_tasks,
                   preference_surcharge)
from .lpsolve import LpModel, LpSolution, solve_bip, solve_lp
from .matching import QualificationUniverse, check_hall, cost_matrix, solve_assignment
from .model import Instance
from .pulse import EPS, Limits, solve_cspp
from .roster import PathStep, Roster, coverage, depot_events, total_objective

log = logging.getLogger(__name__)

SIGMA_TOL = 1e-9


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class Column:
    arcs: tuple[int, ...]
    steps: tuple[PathStep, ...]
    cost: float
    req: frozenset
    tasks: tuple[int, ...]
    events: tuple[str, ...]
    crew_class: int = -1     # only in the preference-aware master

    @classmethod
    def from_arcs(cls, net: Network, arcs: Sequence[int]) -> "Column":
        steps = decode_path(net, arcs)
        cost = float(sum(net.cost[a] for a in arcs if a < net.n_arcs))
        return cls(tuple(arcs), steps, cost, path_lines(net, arcs), tuple(path_tasks(net, arcs)),
                   tuple(depot_events(steps)))

    def for_class(self, c: int, preferred, lambda_o: float) -> "Column":
        extra = lambda_o * sum(1 for o in self.events if o not in preferred)
        return Column(self.arcs, self.steps, self.cost + extra, self.req, self.tasks, self.events, c)

    @property
    def signins(self) -> int:
        return sum(1 for s in self.steps if s.arc_kind == "signin")

    @property
    def deadheads(self) -> int:
        return sum(1 for s in self.steps if s.arc_kind == "deadhead")


@dataclass
class IterationRecord:
    rlmp_obj: float
    n_columns: int
    sigma: float
    duality_gap: float
    qualification: tuple = ()


@dataclass
class PlanResult:
    roster: Roster
    obj: float
    labor: float
    cancel: float
    pref: float
    cvg: float
    iterations: list[IterationRecord] = field(default_factory=list)
    wall_time_s: float = 0.0
    stage1: float = float("nan")
    stage2: float = float("nan")
    notes: list[str] = field(default_factory=list)

    def metrics(self) -> dict:
        return {"obj": round(self.obj, 6), "labor": round(self.labor, 6), "cancel": round(self.cancel, 6),
                "pref": round(self.pref, 6), "cvg": round(self.cvg, 6), "iterations": len(self.iterations),
                "wall_time_s": round(self.wall_time_s, 3)}


def finish_plan(instance: Instance, roster: Roster, t0: float, **kw) -> PlanResult:
    obj, labor, cancel, pref = total_objective(instance, roster)
    roster.labor, roster.cancel, roster.preference = labor, cancel, pref
    return PlanResult(roster, obj, labor, cancel, pref, coverage(instance, roster),
                      wall_time_s=time.perf_counter() - t0, **kw)


def build_initial_paths(net: Network, crew=None, class_of: dict | None = None) -> list[Column]:
    """Sequential member-by-member search with already covered train arcs disabled.

    With ``class_of`` (member id -> class index) the search charges each
    member's preference penalty and the columns are tagged with the class.
    """
    inst = net.instance
    crew = inst.crew if crew is None else crew
    limits = Limits.planning(inst)
    view = NetworkView(net)
    view.disable([])
    cols = []
    for r in sorted(crew, key=lambda r: r.id):
        v = view.copy(allowed_lines=inst.line_mask(r.qualification))
        if class_of is not None:
            v.add_costs(np.arange(net.n_arcs), preference_surcharge(net, r.preferred_depots))
        res = solve_cspp(v, limits)
        if res is None or res.cost >= -EPS:
            continue
        col = Column.from_arcs(net, res.arcs)
        if not col.req:
            continue
        if class_of is not None:
            col = col.for_class(class_of[r.id], r.preferred_depots, inst.params.lambda_o)
        cols.append(col)
        for k in col.tasks:
            view.disable(net.task_arcs[k])
    return cols


class MasterProblem:
    """Restricted master: Hall family rows then one row per task, all <=."""

    def __init__(self, net: Network, universe: QualificationUniverse):
        self.net = net
        self.U = universe
        self.n_tasks = len(net.instance.tasks)
        self.const = float(sum(k.penalty for k in net.instance.tasks))
        self.cols: list[Column] = []
        self.keys: set = set()
        self.basis = None
        self.fixed: list[int] = []     # columns forced to 1 while diving

    def add(self, col: Column) -> bool:
        key = (col.arcs, col.crew_class)
        if key in self.keys:
            return False
        self.keys.add(key)
        self.cols.append(col)
        return True

    def capacity_rows(self) -> tuple[list[list[int]], list[float]]:
        fam_of = {q: self.U.families_containing(q) for q in self.U.Q}
        return [fam_of[col.req] for col in self.cols], [self.U.capacity(i) for i in range(len(self.U.families))]

    def model(self) -> LpModel:
        rows_of, cap = self.capacity_rows()
        F = len(cap)
        T = self.n_tasks
        A = np.zeros((F + T + len(self.fixed), len(self.cols)))
        for j, col in enumerate(self.cols):
            A[rows_of[j], j] = 1.0
            for k in col.tasks:
                A[F + k, j] = 1.0
        for i, j in enumerate(self.fixed):
            A[F + T + i, j] = 1.0
        b = np.concatenate([cap, np.ones(T), np.ones(len(self.fixed))])
        c = np.array([col.cost for col in self.cols])
        return LpModel(c, A, ["<="] * (F + T) + [">="] * len(self.fixed), b)

    def solve(self) -> tuple[LpSolution, float]:
        m = self.model()
        sol = solve_lp(m, self.basis)
        if sol.status != "optimal":
            raise SolverError(f"restricted master: {sol.status}")
        self.basis = sol.basis
        gap = abs(float(m.c @ sol.x) - float(m.b @ sol.duals))
        return sol, gap

    def split_duals(self, duals: np.ndarray):
        # fixing rows come last and hold no entry for a new column
        F = len(duals) - self.n_tasks - len(self.fixed)
        return duals[:F], duals[F:F + self.n_tasks]


class ClassMaster(MasterProblem):
    """Preference-aware variant: columns belong to a crew class (qualification, preferred depots),
    carry that class's preference penalty, and each class has one capacity row."""

    def __init__(self, net: Network, universe: QualificationUniverse, classes: list[tuple]):
        super().__init__(net, universe)
        self.classes = classes      # (qualification, preferred depots, member ids)

    def capacity_rows(self):
        return [[col.crew_class] for col in self.cols], [float(len(m)) for _, _, m in self.classes]


def crew_classes(crew) -> list[tuple]:
    groups: dict = {}
    for r in sorted(crew, key=lambda r: r.id):
        groups.setdefault((r.qualification, r.preferred_depots), []).append(r.id)
    return [(q, o, ids) for (q, o), ids in sorted(groups.items(), key=lambda kv: (sorted(kv[0][0]),
                                                                                   sorted(kv[0][1])))]


def price_classes(net: Network, mu: np.ndarray, nu: np.ndarray, classes: list[tuple]) -> tuple[list[Column], float]:
    """Best reduced-cost column of each crew class, preference penalty included in the search."""
    inst = net.instance
    limits = Limits.planning(inst)
    train = np.flatnonzero(net.kind == A_TRAIN)
    cost = net.cost.copy()
    cost[train] -= nu[net.task[train]]
    found = []
    for c, (q, pref, _) in enumerate(classes):
        res = solve_cspp(NetworkView(net, cost=cost + preference_surcharge(net, pref),
                                     allowed_lines=inst.line_mask(q)), limits)
        if res is None:
            continue
        col = Column.from_arcs(net, res.arcs)
        if not col.req:
            continue
        col = col.for_class(c, pref, inst.params.lambda_o)
        found.append((col.cost - mu[c] - sum(nu[k] for k in col.tasks), c, col))
    if not found:
        return [], 0.0
    found.sort(key=lambda t: (t[0], t[1]))
    return [found[0][2]], found[0][0]


def reduced_cost(col: Column, mu: np.ndarray, nu: np.ndarray, U: QualificationUniverse) -> float:
    return col.cost - sum(mu[i] for i in U.families_containing(col.req)) - sum(nu[k] for k in col.tasks)


def price(net: Network, mu: np.ndarray, nu: np.ndarray, U: QualificationUniverse,
          per_qualification: bool = False) -> tuple[list[Column], float]:
    """Most negative reduced-cost column(s) over every qualification in the universe."""
    inst = net.instance
    limits = Limits.planning(inst)
    train = np.flatnonzero(net.kind == A_TRAIN)
    cost = net.cost.copy()
    cost[train] -= nu[net.task[train]]
    base = NetworkView(net, cost=cost)
    found: list[tuple[float, int, Column]] = []
    for qi, q in enumerate(U.Q):
        res = solve_cspp(base.copy(allowed_lines=inst.line_mask(q)), limits)
        if res is None:
            continue
        col = Column.from_arcs(net, res.arcs)
        if not col.req:
            continue
        found.append((reduced_cost(col, mu, nu, U), qi, col))
    if not found:
        return [], 0.0
    found.sort(key=lambda t: (t[0], t[1]))
    sigma = found[0][0]
    if per_qualification:
        seen, out = set(), []
        for s, _, c in found:
            if s < -SIGMA_TOL and c.arcs not in seen:
                seen.add(c.arcs)
                out.append(c)
        return out, sigma
    return [found[0][2]], sigma


def column_generation(mp: MasterProblem, pricer, max_iter: int, log_rows: list | None = None,
                      notes: list | None = None) -> LpSolution:
    """Solve the restricted master and add priced columns until no negative reduced cost remains."""
    log_rows = [] if log_rows is None else log_rows
    notes = [] if notes is None else notes
    it = 0
    while True:
        sol, gap = mp.solve()
        mu, nu = mp.split_duals(sol.duals)
        cols, sigma = pricer(mu, nu)
        log_rows.append(IterationRecord(sol.objective + mp.const, len(mp.cols), sigma, gap))
        if sigma >= -SIGMA_TOL or not cols:
            return sol
        if not sum(mp.add(c) for c in cols):
            notes.append("pricing returned a column already in the master")
            log.warning("pricing repeated an existing column; stopping")
            return sol
        it += 1
        if it >= max_iter:
            notes.append(f"iteration cap {max_iter} reached")
            log.warning("column generation stopped at the iteration cap %d", max_iter)
            return sol


def price_and_dive(mp: MasterProblem, pricer, max_iter: int, notes: list):
    """Fix the largest fractional column to 1 and re-run column generation until the master is integral.

    Returns (columns, master objective without the constant), or None if the
    dive stalls. The fixings are removed again before returning.
    """
    basis = mp.basis
    try:
        for _ in range(mp.n_tasks + 1):
            sol = column_generation(mp, pricer, max_iter)
            x = sol.x
            frac = [j for j in range(len(x)) if 1e-7 < x[j] < 1 - 1e-7]
            if not frac:
                return [mp.cols[j] for j in np.flatnonzero(x > 0.5)], float(sol.objective)
            j = max(frac, key=lambda j: (x[j], -j))
            mp.fixed.append(j)
            mp.basis = None     # row count changed
        notes.append("price-and-dive did not reach an integral master")
        return None
    finally:
        mp.fixed.clear()
        mp.basis = basis


def plan(instance: Instance, max_iter: int = 5000, per_qualification: bool = False,
         node_limit: int = 1000, net: Network | None = None, preference_aware: bool = False,
         dive: bool = False) -> PlanResult:
    """Column generation over the network, integer path selection, then crew assignment.

    By default stage 1 ignores depot preferences and stage 2 assigns the
    selected paths by a min-cost matching. ``preference_aware`` instead
    prices columns per crew class with the preference penalty inside, which
    is exact for the joint problem but costs one search per class.
    ``dive`` adds a price-and-dive pass when the integer solution over the
    generated columns stays above the LP bound.
    """
    t0 = time.perf_counter()
    net = net or build_network(instance)
    U = QualificationUniverse.from_crew(instance.crew)
    if preference_aware:
        classes = crew_classes(instance.crew)
        class_of = {r: c for c, (_, _, ids) in enumerate(classes) for r in ids}
        mp: MasterProblem = ClassMaster(net, U, classes)
    else:
        class_of = None
        mp = MasterProblem(net, U)
    for col in build_initial_paths(net, class_of=class_of):
        mp.add(col)
    log_rows: list[IterationRecord] = []
    notes = []
    if not instance.crew:
        return finish_plan(instance, Roster({}), t0)

    def pricer(mu, nu):
        if preference_aware:
            return price_classes(net, mu, nu, mp.classes)
        return price(net, mu, nu, U, per_qualification)

    sol = column_generation(mp, pricer, max_iter, log_rows, notes)

    # restricted integer problem over the generated columns
    m = mp.model()
    if mp.cols:
        bip = solve_bip(m, node_limit=node_limit)
        if bip.status == "infeasible":
            raise SolverError("restricted integer problem infeasible")
        if bip.status != "optimal":
            notes.append(f"branch and bound: {bip.status}")
        chosen = [mp.cols[j] for j in np.flatnonzero(bip.x > 0.5)]
        stage1 = float(bip.objective) + mp.const
        if dive and stage1 > sol.objective + mp.const + 1e-6:
            dived = price_and_dive(mp, pricer, max_iter, notes)
            if dived is not None and dived[1] + mp.const < stage1 - 1e-9:
                chosen, stage1 = dived[0], dived[1] + mp.const
    else:
        chosen, stage1 = [], mp.const

    if preference_aware:
        paths = {r.id: () for r in instance.crew}
        pref = 0.0
        for c, (_, o, ids) in enumerate(mp.classes):
            mine = [col for col in chosen if col.crew_class == c]
            for rid, col in zip(ids, mine):
                paths[rid] = col.steps
                pref += instance.params.lambda_o * sum(1 for e in col.events if e not in o)
        res = finish_plan(instance, Roster(paths), t0, iterations=log_rows, stage1=stage1 - pref, stage2=pref,
                          notes=notes)
        if abs(res.obj - stage1) > 1e-6 * max(1.0, abs(res.obj)):
            raise SolverError(f"objective mismatch: recomputed {res.obj} vs solver {stage1}")
        return res

    counts: dict = {}
    for c in chosen:
        counts[c.req] = counts.get(c.req, 0) + 1
    if not check_hall(counts, U.pools, U.families):
        raise SolverError("selected columns violate the matching families")
    crew = sorted(instance.crew, key=lambda r: r.id)
    n_pad = len(crew) - len(chosen)
    reqs = [c.req for c in chosen] + [frozenset()] * n_pad
    events = [c.events for c in chosen] + [()] * n_pad
    C = cost_matrix(crew, reqs, events, instance.params.lambda_o)
    assign, stage2 = solve_assignment(C)
    paths = {r.id: (chosen[assign[i]].steps if assign[i] < len(chosen) else ()) for i, r in enumerate(crew)}
    res = finish_plan(instance, Roster(paths), t0, iterations=log_rows, stage1=stage1, stage2=stage2,
                      notes=notes)
    if abs(res.obj - (stage1 + stage2)) > 1e-6 * max(1.0, abs(res.obj)):
        raise SolverError(f"objective mismatch: recomputed {res.obj} vs solver {stage1 + stage2}")
    return res
