"""Hierarchical time-space network: build, views, decoding and debug export.

Vertices are numbered in a topological order (every arc has tail < head), so
vertex 0 is the source and the last vertex is the sink.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .model import Instance, Params, TrainTask, enumerate_duty_frames
from .roster import PathStep, merge_idles
from .validate import pass_time, transfer_fracs

log = logging.getLogger(__name__)

# vertex kinds
V_SOURCE, V_SINK, V_START, V_END, V_FILTER, V_STATE, V_ARRIVE = range(7)
VERTEX_NAMES = ("source", "sink", "start", "end", "filter", "state", "arrive")
_RANK = {V_START: 0, V_FILTER: 1, V_ARRIVE: 2, V_STATE: 3, V_END: 4}

# arc kinds
(A_TRAIN, A_REST, A_MEAL, A_IDLE, A_FILTER, A_DEADHEAD, A_SIGNIN, A_SIGNOUT,
 A_SHIFT, A_START, A_END, A_OFFWORK, A_VIRTUAL) = range(13)
ARC_NAMES = ("train", "rest", "meal", "idle", "filter", "deadhead", "signin", "signout",
             "shift", "start", "end", "offwork", "virtual")

# resource classes consumed by the path search
R_PLAIN, R_SIGNIN, R_VIRTUAL, R_MEAL, R_SIGNOUT, R_DEADHEAD = range(6)


class NetworkError(RuntimeError):
    pass


def arc_cost(kind: int, duration: int, params: Params, penalty: float = 0.0) -> float:
    """Signed arc cost; train arcs rebate the cancel penalty of the task they cover."""
    if kind == A_TRAIN:
        return params.c_w * duration - penalty
    if kind in (A_REST, A_MEAL, A_IDLE, A_DEADHEAD, A_SIGNIN, A_SIGNOUT):
        return params.c_r * duration
    return 0.0


def block_tasks(tasks: Iterable[TrainTask], a_u: int, params: Params) -> list[TrainTask]:
    lo = a_u + params.t_si
    hi = a_u + min(params.H, params.t_max) - params.t_so
    return [k for k in tasks if k.dep_time >= lo and k.arr_time <= hi]


def find_deadhead_pairs(instance: Instance, l1: str, l2: str, day: int, duty: int,
                        tasks: Sequence[TrainTask] | None = None) -> list[tuple[int, int]]:
    """(k1, k2) pairs: ride k1 to a transfer station, then k2 to its terminal.

    For each k1 and each direction of l2 the k2 with the earliest arrival is
    kept (ties to the lowest id) among those passing the station at least
    t_tf after k1.
    """
    p = instance.params
    frames = enumerate_duty_frames(p, instance.horizon)
    a_u = frames[duty].start
    pool = instance.tasks if tasks is None else tasks
    t1 = block_tasks([k for k in pool if k.line == l1 and k.day == day], a_u, p)
    t2 = block_tasks([k for k in pool if k.line == l2 and k.day == day], a_u, p)
    fracs = transfer_fracs(instance, l1, l2)
    if not fracs or l1 == l2:
        return []
    out = []
    for k1 in sorted(t1, key=lambda k: k.id):
        for direction in instance.line(l2).depots:
            best = None
            for k2 in t2:
                if k2.dep_depot != direction or k2.arr_time <= k1.dep_time:
                    continue
                if not any(pass_time(k2, instance, fb) >= pass_time(k1, instance, fa) + p.t_tf
                           for fa, fb in fracs):
                    continue
                key = (k2.arr_time, k2.id)
                if best is None or key < best[0]:
                    best = (key, k2)
            if best is not None:
                out.append((k1.id, best[1].id))
    return out


@dataclass(frozen=True)
class ExtraPoint:
    """A state or arrival vertex that must exist, e.g. a replanning resumption point."""
    day: int
    duty: int
    depot: str
    time: int
    kind: str = "state"  # or "arrive"


class _Builder:
    def __init__(self):
        self.keys: dict[tuple, int] = {}
        self.rows: list[tuple] = []
        self.arcs: list[tuple] = []

    def vertex(self, kind, day=-1, duty=-1, line=-1, time=-1, depot=-1) -> int:
        key = (kind, day, duty, line, time, depot)
        v = self.keys.get(key)
        if v is None:
            v = len(self.rows)
            self.keys[key] = v
            self.rows.append(key)
        return v

    def arc(self, kind, tail, head, cost, task=-1, task2=-1, mask=0, depot=-1, res=R_PLAIN):
        self.arcs.append((tail, head, kind, task, task2, cost, mask, depot, res))


@dataclass
class Network:
    instance: Instance
    days: tuple[int, ...]
    depots: tuple[str, ...]
    v_kind: np.ndarray
    v_day: np.ndarray
    v_duty: np.ndarray
    v_line: np.ndarray
    v_time: np.ndarray
    v_depot: np.ndarray
    tail: np.ndarray
    head: np.ndarray
    kind: np.ndarray
    task: np.ndarray   # task index into instance.tasks, -1 if none
    task2: np.ndarray  # second task of a deadhead
    cost: np.ndarray
    line_mask: np.ndarray
    depot: np.ndarray  # sign-in depot of filter arcs, sign-out depot of sign-out arcs
    res: np.ndarray
    out_start: np.ndarray
    task_arcs: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def n_vertices(self) -> int:
        return len(self.v_kind)

    @property
    def n_arcs(self) -> int:
        return len(self.tail)

    @property
    def source(self) -> int:
        return 0

    @property
    def sink(self) -> int:
        return self.n_vertices - 1

    def vertex_label(self, v: int) -> tuple:
        k = int(self.v_kind[v])
        lines = self.instance.lines
        parts = [VERTEX_NAMES[k]]
        if k in (V_START, V_END):
            parts += [int(self.v_day[v]), int(self.v_time[v])]
        elif k == V_FILTER:
            parts += [int(self.v_day[v]), int(self.v_duty[v])]
        elif k in (V_STATE, V_ARRIVE):
            parts += [int(self.v_day[v]), int(self.v_duty[v]), lines[self.v_line[v]].id,
                      int(self.v_time[v]), self.depots[self.v_depot[v]]]
        return tuple(parts)

    def find_vertex(self, kind: int, day: int, duty: int, depot: str, time: int) -> int:
        di = self.depots.index(depot)
        hit = np.flatnonzero((self.v_kind == kind) & (self.v_day == day) & (self.v_duty == duty)
                             & (self.v_depot == di) & (self.v_time == time))
        if len(hit) == 0:
            raise KeyError((VERTEX_NAMES[kind], day, duty, depot, time))
        return int(hit[0])

    def layer_vertices(self, day: int, duty: int) -> np.ndarray:
        return np.flatnonzero((self.v_day == day) & (self.v_duty == duty))

    def edge_list(self) -> str:
        """Text edge list for golden-file comparisons."""
        lines = []
        for a in range(self.n_arcs):
            lines.append(f"{self.vertex_label(self.tail[a])} -> {self.vertex_label(self.head[a])} "
                         f"{ARC_NAMES[self.kind[a]]} {self.cost[a]:.4f}")
        return "\n".join(lines) + "\n"


def build_network(instance: Instance, days: Sequence[int] | None = None,
                  extra_points: Sequence[ExtraPoint] = ()) -> Network:
    p = instance.params
    days = tuple(instance.days if days is None else days)
    frames = enumerate_duty_frames(p, instance.horizon)
    if not frames:
        raise NetworkError("no duty frame fits the day horizon")
    depots = tuple(o for l in instance.lines for o in l.depots)
    dep_idx = {o: i for i, o in enumerate(depots)}
    task_idx = {k.id: i for i, k in enumerate(instance.tasks)}
    by_day_line: dict[tuple[int, str], list[TrainTask]] = {}
    for k in instance.tasks:
        by_day_line.setdefault((k.day, k.line), []).append(k)
    extras: dict[tuple[int, int, str], list[ExtraPoint]] = {}
    for e in extra_points:
        extras.setdefault((e.day, e.duty, e.depot), []).append(e)

    b = _Builder()
    src = b.vertex(V_SOURCE)
    snk = b.vertex(V_SINK)
    end_vertices: dict[int, list[int]] = {d: [] for d in days}
    start_vertices: dict[int, list[int]] = {d: [] for d in days}
    cr = p.c_r

    for d in days:
        for fr in frames:
            a, u = fr.start, fr.index
            t0 = a + p.t_si
            thr = a + p.t_min - p.t_so      # earliest sign-out start without waiting
            last_so = a + p.t_max - p.t_so  # latest sign-out start
            mb, me = a + p.t_mb, a + p.t_me
            start = b.vertex(V_START, d, time=a)
            if start not in start_vertices[d]:
                start_vertices[d].append(start)
                b.arc(A_START, src, start, 0.0)
            filt = b.vertex(V_FILTER, d, u, time=t0)
            b.arc(A_SIGNIN, start, filt, cr * p.t_si, res=R_SIGNIN)

            blocks = {l.id: block_tasks(by_day_line.get((d, l.id), []), a, p) for l in instance.lines}
            times = {o: {t0} for o in depots}
            meal_only: dict[str, set] = {o: set() for o in depots}
            arrive_times: dict[str, set] = {o: set() for o in depots}
            for l in instance.lines:
                for k in blocks[l.id]:
                    times[k.dep_depot].add(k.dep_time)
                    arrive_times[k.arr_depot].add(k.arr_time)
                for o in l.depots:
                    for e in extras.get((d, u, o), []):
                        (arrive_times if e.kind == "arrive" else times)[o].add(e.time)
                    times[o] |= {t + p.t_rt for t in arrive_times[o] if t + p.t_rt <= a + p.H}
            deadheads = []
            for l1 in instance.lines:
                for l2 in instance.lines:
                    if l1.id == l2.id:
                        continue
                    for k1, k2 in find_deadhead_pairs(instance, l1.id, l2.id, d, u,
                                                      blocks[l1.id] + blocks[l2.id]):
                        t1, t2 = instance.task_by_id()[k1], instance.task_by_id()[k2]
                        if t2.arr_time > t1.dep_time:
                            deadheads.append((t1, t2))
                            times[t2.arr_depot].add(t2.arr_time)

            # meal ends: such vertices spawn no meal arcs of their own
            for o in depots:
                base = sorted(times[o])
                before = [t for t in base if t < mb]
                srcs = [t for t in base if t >= mb] + before[-1:] + sorted(arrive_times[o])
                for t in srcs:
                    te = max(t, mb) + p.t_ml
                    if te <= me and te not in times[o]:
                        meal_only[o].add(te)
                times[o] |= meal_only[o]

            for l in instance.lines:
                bit = 1 << instance.line_index(l.id)
                li = instance.line_index(l.id)
                sv = {}
                for o in l.depots:
                    oi = dep_idx[o]
                    ts = sorted(t for t in times[o] if t0 <= t <= a + p.H)
                    sv[o] = {t: b.vertex(V_STATE, d, u, li, t, oi) for t in ts}
                    b.arc(A_FILTER, filt, sv[o][t0], 0.0, mask=bit, depot=oi)
                    for t1, t2 in zip(ts, ts[1:]):
                        b.arc(A_IDLE, sv[o][t1], sv[o][t2], cr * (t2 - t1))
                for k in blocks[l.id]:
                    arr = b.vertex(V_ARRIVE, d, u, li, k.arr_time, dep_idx[k.arr_depot])
                    b.arc(A_TRAIN, sv[k.dep_depot][k.dep_time], arr,
                          arc_cost(A_TRAIN, k.duration, p, k.penalty), task=task_idx[k.id], mask=bit)
                for o in l.depots:
                    oi = dep_idx[o]
                    for t in arrive_times[o]:
                        if t0 <= t <= a + p.H:
                            b.vertex(V_ARRIVE, d, u, li, t, oi)

                def meal_arc(v, t, o):
                    te = max(t, mb) + p.t_ml
                    if te <= me:
                        b.arc(A_MEAL, v, sv[o][te], cr * (te - t), res=R_MEAL)

                def signout_arc(v, t, o):
                    if t > last_so:
                        return
                    te = max(t + p.t_so, a + p.t_min)
                    end = b.vertex(V_END, d, time=te)
                    if end not in end_vertices[d]:
                        end_vertices[d].append(end)
                    b.arc(A_SIGNOUT, v, end, cr * (te - t), depot=dep_idx[o], res=R_SIGNOUT)

                for o in l.depots:
                    oi = dep_idx[o]
                    ts = sorted(sv[o])
                    rest = [t for t in ts if t not in meal_only[o]]
                    before = [t for t in rest if t < mb]
                    for t in [t for t in rest if t >= mb] + before[-1:]:
                        meal_arc(sv[o][t], t, o)
                    early = [t for t in ts if t < thr]
                    for t in [t for t in ts if t >= thr] + early[-1:]:
                        signout_arc(sv[o][t], t, o)
                    for t in sorted(arrive_times[o]):
                        if not t0 <= t <= a + p.H:
                            continue
                        av = b.vertex(V_ARRIVE, d, u, li, t, oi)
                        if t + p.t_rt in sv[o]:
                            b.arc(A_REST, av, sv[o][t + p.t_rt], cr * p.t_rt)
                        meal_arc(av, t, o)
                        if t + p.t_rt > thr:
                            signout_arc(av, t, o)
                # deadheads leaving this line
                for t1, t2 in deadheads:
                    if t1.line != l.id:
                        continue
                    l2i = instance.line_index(t2.line)
                    head = b.vertex(V_STATE, d, u, l2i, t2.arr_time, dep_idx[t2.arr_depot])
                    b.arc(A_DEADHEAD, sv[t1.dep_depot][t1.dep_time], head,
                          cr * (t2.arr_time - t1.dep_time), task=task_idx[t1.id], task2=task_idx[t2.id],
                          mask=bit | (1 << l2i), res=R_DEADHEAD)

    for d in days:
        for e in end_vertices[d]:
            b.arc(A_END, e, snk, 0.0)
            for d2 in days:
                if d2 > d:
                    for s in start_vertices[d2]:
                        b.arc(A_SHIFT, e, s, 0.0)
    b.arc(A_OFFWORK, src, snk, 0.0)
    seeds = [b.keys[(V_ARRIVE if e.kind == "arrive" else V_STATE, e.day, e.duty,
                     instance.line_index(instance.depot_line(e.depot)), e.time, dep_idx[e.depot])]
             for e in extra_points if (V_ARRIVE if e.kind == "arrive" else V_STATE, e.day, e.duty,
                                       instance.line_index(instance.depot_line(e.depot)), e.time,
                                       dep_idx[e.depot]) in b.keys]
    net = _finalize(instance, days, depots, b, seeds)
    if not np.any(net.kind == A_SIGNIN):
        raise NetworkError("no feasible duty exists in any duty layer")
    return net


def _finalize(instance, days, depots, b: _Builder, seeds) -> Network:
    rows = b.rows
    n_days = instance.n_days

    def order_key(i):
        kind, day, duty, line, time, depot = rows[i]
        if kind == V_SOURCE:
            return (-1, 0, 0, 0, 0, 0)
        if kind == V_SINK:
            return (n_days + 1, 0, 0, 0, 0, 0)
        return (day, time, _RANK[kind], duty, line, depot)

    order = sorted(range(len(rows)), key=order_key)
    pos = np.empty(len(rows), dtype=np.int64)
    pos[order] = np.arange(len(rows))
    arcs = b.arcs
    tail = pos[np.array([a[0] for a in arcs], dtype=np.int64)]
    head = pos[np.array([a[1] for a in arcs], dtype=np.int64)]
    if np.any(tail >= head):
        raise NetworkError("network is not acyclic under the time order")
    n = len(rows)
    # keep vertices reachable from the source (or a seed) that also reach the sink
    fwd = np.zeros(n, dtype=bool)
    fwd[0] = True
    for s in seeds:
        fwd[pos[s]] = True
    bwd = np.zeros(n, dtype=bool)
    bwd[n - 1] = True
    by_tail = np.argsort(tail, kind="stable")
    for a in by_tail:
        if fwd[tail[a]]:
            fwd[head[a]] = True
    # heads exceed tails, so a descending sweep over tails settles each head first
    for a in by_tail[::-1]:
        if bwd[head[a]]:
            bwd[tail[a]] = True
    keep_v = fwd & bwd
    keep_a = keep_v[tail] & keep_v[head]
    new_id = np.cumsum(keep_v) - 1
    tail = new_id[tail[keep_a]]
    head = new_id[head[keep_a]]
    sel = [arcs[i] for i in np.flatnonzero(keep_a)]
    kind = np.array([a[2] for a in sel], dtype=np.int64)
    task = np.array([a[3] for a in sel], dtype=np.int64)
    task2 = np.array([a[4] for a in sel], dtype=np.int64)
    cost = np.array([a[5] for a in sel], dtype=np.float64)
    mask = np.array([a[6] for a in sel], dtype=np.int64)
    dep = np.array([a[7] for a in sel], dtype=np.int64)
    res = np.array([a[8] for a in sel], dtype=np.int64)
    srt = np.lexsort((task2, task, kind, head, tail))
    tail, head, kind, task, task2, cost, mask, dep, res = (
        x[srt] for x in (tail, head, kind, task, task2, cost, mask, dep, res))
    vsel = [order[i] for i in range(n) if keep_v[i]]
    vr = np.array([rows[i] for i in vsel], dtype=np.int64).reshape(-1, 6)
    n_keep = len(vsel)
    out_start = np.zeros(n_keep + 1, dtype=np.int64)
    np.add.at(out_start, tail + 1, 1)
    out_start = np.cumsum(out_start)
    task_arcs: dict[int, list[int]] = {}
    for a in np.flatnonzero(kind == A_TRAIN):
        task_arcs.setdefault(int(task[a]), []).append(int(a))
    return Network(instance, tuple(days), depots, vr[:, 0].copy(), vr[:, 1].copy(), vr[:, 2].copy(),
                   vr[:, 3].copy(), vr[:, 4].copy(), vr[:, 5].copy(), tail, head, kind, task, task2, cost,
                   mask, dep, res, out_start,
                   {k: np.array(v, dtype=np.int64) for k, v in task_arcs.items()})


# ---------------------------------------------------------------- views


@dataclass
class Compiled:
    """Flat arrays handed to the search kernels; positions are sorted by arc id per tail."""
    n_vertices: int
    out_start: np.ndarray
    head: np.ndarray
    cost: np.ndarray
    res: np.ndarray
    arc_id: np.ndarray


@dataclass
class NetworkView:
    """Cheap per-search restriction of a shared network.

    ``cost`` replaces the base arc costs when given; ``virtual`` lists extra
    zero-cost source arcs (resumption entries) whose ids follow the base arcs.
    """
    net: Network
    cost: np.ndarray | None = None
    disabled: np.ndarray | None = None
    allowed_lines: int = -1
    meal_preset: int = 0
    virtual: tuple[int, ...] = ()

    def arc_costs(self) -> np.ndarray:
        return self.net.cost if self.cost is None else self.cost

    def enabled(self) -> np.ndarray:
        net = self.net
        ok = np.ones(net.n_arcs, dtype=bool) if self.disabled is None else ~self.disabled
        if self.allowed_lines != -1:
            ok &= (net.line_mask & ~np.int64(self.allowed_lines)) == 0
        return ok

    def copy(self, **kw) -> "NetworkView":
        d = dict(net=self.net, cost=None if self.cost is None else self.cost.copy(),
                 disabled=None if self.disabled is None else self.disabled.copy(),
                 allowed_lines=self.allowed_lines, meal_preset=self.meal_preset, virtual=self.virtual)
        d.update(kw)
        return NetworkView(**d)

    def disable(self, arcs) -> None:
        if self.disabled is None:
            self.disabled = np.zeros(self.net.n_arcs, dtype=bool)
        self.disabled[np.asarray(arcs, dtype=np.int64)] = True

    def add_costs(self, arcs, delta) -> None:
        if self.cost is None:
            self.cost = self.net.cost.copy()
        np.add.at(self.cost, np.asarray(arcs, dtype=np.int64), delta)

    def compile(self) -> Compiled:
        net = self.net
        keep = np.flatnonzero(self.enabled())
        tails = net.tail[keep]
        heads = net.head[keep]
        costs = self.arc_costs()[keep]
        res = net.res[keep]
        ids = keep
        if self.virtual:
            nv = len(self.virtual)
            tails = np.concatenate([tails, np.zeros(nv, dtype=np.int64)])
            heads = np.concatenate([heads, np.asarray(self.virtual, dtype=np.int64)])
            costs = np.concatenate([costs, np.zeros(nv)])
            res = np.concatenate([res, np.full(nv, R_VIRTUAL, dtype=np.int64)])
            ids = np.concatenate([ids, net.n_arcs + np.arange(nv, dtype=np.int64)])
            o = np.lexsort((ids, tails))
            tails, heads, costs, res, ids = tails[o], heads[o], costs[o], res[o], ids[o]
        out_start = np.zeros(net.n_vertices + 1, dtype=np.int64)
        np.add.at(out_start, tails + 1, 1)
        return Compiled(net.n_vertices, np.cumsum(out_start), np.ascontiguousarray(heads),
                        np.ascontiguousarray(costs, dtype=np.float64), np.ascontiguousarray(res), ids)


def full_view(net: Network) -> NetworkView:
    return NetworkView(net)


def preference_surcharge(net: Network, preferred: Iterable[str]) -> np.ndarray:
    """Per-arc extra cost: lambda_o on sign-in (filter) and sign-out arcs at unpreferred depots."""
    pref = np.array([o in set(preferred) for o in net.depots] + [True])
    out = np.zeros(net.n_arcs)
    hit = (net.depot >= 0) & ~pref[net.depot]
    out[hit] = net.instance.params.lambda_o
    return out


def decode_path(net: Network, arcs: Sequence[int]) -> tuple[PathStep, ...]:
    """Arc ids (virtual ids allowed) to a duty list."""
    inst = net.instance
    p = inst.params
    lines = inst.lines
    steps: list[PathStep] = []
    pending = None
    vt, vdep = net.v_time, net.v_depot

    def dname(v):
        return net.depots[vdep[v]]

    for a in arcs:
        a = int(a)
        if a >= net.n_arcs:
            continue
        k = net.kind[a]
        tv, hv = int(net.tail[a]), int(net.head[a])
        if k == A_SIGNIN:
            pending = (int(net.v_day[hv]), int(net.v_duty[hv]), int(vt[tv]), int(vt[hv]))
        elif k == A_FILTER:
            d, u, t0, t1 = pending
            o = net.depots[net.depot[a]]
            steps.append(PathStep("signin", d, u, t0, t1, o, o))
            pending = None
        elif k == A_TRAIN:
            task = inst.tasks[net.task[a]]
            steps.append(PathStep("train", task.day, int(net.v_duty[tv]), task.dep_time, task.arr_time,
                                  task.dep_depot, task.arr_depot, line=task.line, task=task.id))
        elif k in (A_REST, A_IDLE):
            steps.append(PathStep(ARC_NAMES[k], int(net.v_day[tv]), int(net.v_duty[tv]), int(vt[tv]),
                                  int(vt[hv]), dname(tv), dname(hv)))
        elif k in (A_MEAL, A_SIGNOUT):
            d, u, o = int(net.v_day[tv]), int(net.v_duty[tv]), dname(tv)
            begin = int(vt[hv]) - (p.t_ml if k == A_MEAL else p.t_so)
            if begin > vt[tv]:
                steps.append(PathStep("idle", d, u, int(vt[tv]), begin, o, o))
            steps.append(PathStep(ARC_NAMES[k], d, u, begin, int(vt[hv]), o, o))
        elif k == A_DEADHEAD:
            k1, k2 = inst.tasks[net.task[a]], inst.tasks[net.task2[a]]
            steps.append(PathStep("deadhead", k1.day, int(net.v_duty[tv]), k1.dep_time, k2.arr_time,
                                  k1.dep_depot, k2.arr_depot, line=k1.line, task=k1.id,
                                  line_to=k2.line, task_to=k2.id))
    return merge_idles(steps)


def path_lines(net: Network, arcs: Sequence[int]) -> frozenset:
    """Lines on which the path runs or rides trains (its requirement set)."""
    inst = net.instance
    out = set()
    for a in arcs:
        a = int(a)
        if a < net.n_arcs and net.kind[a] in (A_TRAIN, A_DEADHEAD):
            out.add(inst.tasks[net.task[a]].line)
            if net.kind[a] == A_DEADHEAD:
                out.add(inst.tasks[net.task2[a]].line)
    return frozenset(out)


def path_tasks(net: Network, arcs: Sequence[int]) -> list[int]:
    """Indices (into instance.tasks) of tasks served by the path."""
    return [int(net.task[a]) for a in arcs if a < net.n_arcs and net.kind[a] == A_TRAIN]


# ---------------------------------------------------------------- replanning entry


@dataclass(frozen=True)
class Resumption:
    """Where a member's trajectory on the replanning day can be picked up."""
    on_duty: bool
    duty: int
    a_u: int
    time: int = -1
    depot: str = ""
    kind: str = "state"
    prefix: tuple[PathStep, ...] = ()
    meals: int = 0


def resumption_point(day_steps: Sequence[PathStep], t_bar: int, a_u: int, params: Params) -> Resumption | None:
    """None when the member is off duty or already signing out at t_bar.

    A step in progress at t_bar is finished first, except idling which can be
    interrupted at t_bar itself.
    """
    if not day_steps:
        return None
    duty = day_steps[0].duty
    if day_steps[-1].t_from < t_bar:
        return None  # sign-out already started
    if a_u >= t_bar:
        return Resumption(False, duty, a_u)
    prefix: list[PathStep] = []
    for i, s in enumerate(day_steps):
        if s.t_to <= t_bar:
            prefix.append(s)
            continue
        if s.t_from >= t_bar:
            prev = prefix[-1]
            kind = "arrive" if prev.arc_kind == "train" else "state"
            return _res(duty, a_u, prev.t_to, prev.depot_to, kind, prefix)
        # strictly inside
        if s.arc_kind == "idle":
            prefix.append(replace(s, t_to=t_bar))
            return _res(duty, a_u, t_bar, s.depot_from, "state", prefix)
        prefix.append(s)
        kind = "arrive" if s.arc_kind == "train" else "state"
        return _res(duty, a_u, s.t_to, s.depot_to, kind, prefix)
    return None


def _res(duty, a_u, t, o, kind, prefix):
    meals = sum(1 for s in prefix if s.arc_kind == "meal")
    return Resumption(True, duty, a_u, int(t), o, kind, tuple(prefix), meals)


def build_restricted_subnetwork(net: Network, res: Resumption, day: int, qualification: Iterable[str],
                                base: NetworkView | None = None) -> NetworkView:
    """View limited to one duty layer of ``day``, entered at the resumption vertex.

    Members not yet on duty keep their own sign-in entry for that layer.
    """
    inst = net.instance
    view = (base or NetworkView(net)).copy()
    tk = net.v_kind[net.tail]
    in_layer = (np.isin(tk, (V_STATE, V_ARRIVE)) & (net.v_day[net.tail] == day)
                & (net.v_duty[net.tail] == res.duty))
    ok = in_layer | (tk == V_END) & (net.v_day[net.tail] == day) & (net.kind == A_END)
    if res.on_duty:
        vk = V_ARRIVE if res.kind == "arrive" else V_STATE
        entry = net.find_vertex(vk, day, res.duty, res.depot, res.time)
        view.virtual = (entry,)
        view.meal_preset = res.meals
    else:
        filt = np.flatnonzero((net.v_kind == V_FILTER) & (net.v_day == day) & (net.v_duty == res.duty))
        start = np.flatnonzero((net.v_kind == V_START) & (net.v_day == day) & (net.v_time == res.a_u))
        if len(filt) == 0 or len(start) == 0:
            raise NetworkError(f"duty layer {res.duty} on day {day} has no entry")
        ok |= (net.tail == filt[0]) & (net.kind == A_FILTER)
        ok |= (net.tail == start[0]) & (net.head == filt[0])
        ok |= (net.tail == net.source) & (net.head == start[0])
        view.virtual = ()
        view.meal_preset = 0
    view.disable(np.flatnonzero(~ok))
    view.allowed_lines = inst.line_mask(qualification)
    return view
