"""Independent reference implementations used only by the tests.

Nothing here imports solver internals beyond plain data: each oracle works
from the operating rules directly, by brute force.
"""

from __future__ import annotations

import itertools

import numpy as np

from metrocrew.htsn import (A_DEADHEAD, A_MEAL, A_SIGNIN, A_SIGNOUT, NetworkView)
from metrocrew.model import (CrewMember, Instance, Line, Params, TrainTask, enumerate_duty_frames,
                             task_penalty)


# ---------------------------------------------------------------- matching

def perfect_matching_exists(counts: dict, pools: dict) -> bool:
    """Kuhn's augmenting paths on the explicit path/member bipartite graph."""
    paths = [q for q in sorted(counts, key=sorted) for _ in range(counts[q])]
    members = [q for q in sorted(pools, key=sorted) for _ in range(pools[q])]
    if len(paths) > len(members):
        return False
    adj = [[j for j, m in enumerate(members) if p <= m] for p in paths]
    owner = [-1] * len(members)

    def augment(i, seen):
        for j in adj[i]:
            if j in seen:
                continue
            seen.add(j)
            if owner[j] < 0 or augment(owner[j], seen):
                owner[j] = i
                return True
        return False

    return all(augment(i, set()) for i in range(len(paths)))


# ---------------------------------------------------------------- path enumeration

class TooManyPaths(Exception):
    pass


def iter_paths(view: NetworkView):
    """Every Source->Sink arc sequence of the view with its cost, ignoring resources."""
    net = view.net
    ok = view.enabled()
    cost = view.arc_costs()
    out: dict[int, list[tuple[int, int, float]]] = {}
    for a in np.flatnonzero(ok):
        out.setdefault(int(net.tail[a]), []).append((int(a), int(net.head[a]), float(cost[a])))
    starts = [(int(net.n_arcs + i), int(v), 0.0) for i, v in enumerate(view.virtual)]
    if view.virtual:
        out[net.source] = out.get(net.source, []) + starts
    for v in out:
        out[v].sort()
    stack = [(net.source, (), 0.0)]
    while stack:
        v, arcs, c = stack.pop()
        if v == net.sink:
            yield arcs, c
            continue
        for a, h, ca in reversed(out.get(v, [])):
            stack.append((h, arcs + (a,), c + ca))


def enumerate_feasible_paths(view: NetworkView, signins: int, dh_cap: int, limit: int = 10_000):
    """All Source->Sink arc sequences of the view, filtered by the duty rules.

    Returns (number of paths, best cost, best arc tuple); ties go to the
    lexicographically smallest arc-id sequence.
    """
    n = 0
    best = (np.inf, None)
    for arcs, c in iter_paths(view):
        n += 1
        if n > limit:
            raise TooManyPaths
        if rules_ok(view.net, arcs, signins, dh_cap, view.meal_preset):
            if c < best[0] or (c == best[0] and arcs < best[1]):
                best = (c, arcs)
    return n, best[0], best[1]


def rules_ok(net, arcs, signins, dh_cap, meal_preset) -> bool:
    n_si = n_dh = 0
    meals = None
    for a in arcs:
        if a >= net.n_arcs:          # resumption entry: meals already taken count
            meals = meal_preset
            continue
        k = net.kind[a]
        if k == A_SIGNIN:
            n_si += 1
            meals = 0
        elif k == A_MEAL:
            if meals is None:
                return False
            meals += 1
            if meals > 1:
                return False
        elif k == A_SIGNOUT:
            if meals != 1:
                return False
            meals = None
        elif k == A_DEADHEAD:
            n_dh += 1
    if n_si > signins:
        return False
    return dh_cap < 0 or n_dh <= dh_cap


# ---------------------------------------------------------------- toy rosters

def toy_duties(inst: Instance, member: CrewMember):
    """Every feasible single-line duty of a one-day instance: list of (task ids, cost incl. preference)."""
    p = inst.params
    out: dict[frozenset, float] = {}
    for fr in enumerate_duty_frames(p, inst.horizon):
        a = fr.start
        t0 = a + p.t_si
        hi = a + min(p.H, p.t_max) - p.t_so
        for line in inst.lines:
            if line.id not in member.qualification:
                continue
            ks = sorted((k for k in inst.tasks if k.line == line.id and k.dep_time >= t0 and k.arr_time <= hi),
                        key=lambda k: (k.dep_time, k.id))
            for o in line.depots:
                for seq in _chains(ks, o, p):
                    for pos in range(len(seq) + 1):
                        c = _duty_cost(seq, pos, a, o, p, member, inst)
                        if c is None:
                            continue
                        key = frozenset(k.id for k in seq)
                        if c < out.get(key, np.inf):
                            out[key] = c
    return sorted(out.items(), key=lambda kv: (sorted(kv[0]), kv[1]))


def _chains(ks, o, p):
    """Depot-consistent task sequences starting at o (gaps checked later with the meal placement)."""
    yield ()
    stack = [((k,),) for k in ks if k.dep_depot == o]
    while stack:
        (seq,) = stack.pop()
        yield seq
        last = seq[-1]
        for k in ks:
            if k.dep_depot == last.arr_depot and k.dep_time > last.arr_time:
                stack.append((seq + (k,),))


def _duty_cost(seq, pos, a, o, p: Params, member, inst):
    """Cost of sign-in at o, tasks ``seq`` with the meal before seq[pos] (or at the end), sign-out."""
    t = a + p.t_si
    end_depot = o
    train = 0
    for i in range(len(seq) + 1):
        if i == pos:
            ms = max(t, a + p.t_mb)
            te = ms + p.t_ml
            nxt = seq[i].dep_time if i < len(seq) else np.inf
            if te > a + p.t_me or te > nxt:
                return None
            t = te
        if i == len(seq):
            break
        k = seq[i]
        gap_needed = p.t_rt if (i > 0 and pos != i) else 0
        if k.dep_time < t + gap_needed:
            return None
        t = k.arr_time
        end_depot = k.arr_depot
        train += k.duration
    so = max(t, a + p.t_min - p.t_so)
    if so > a + p.t_max - p.t_so:
        return None
    span = so + p.t_so - a
    labor = p.c_r * (span - train) + p.c_w * train
    pref = p.lambda_o * ((o not in member.preferred_depots) + (end_depot not in member.preferred_depots))
    return labor + pref


def toy_optimum(inst: Instance) -> float:
    """min over rosters of labor + preference + uncovered penalties, by DP over task masks."""
    ids = sorted(k.id for k in inst.tasks)
    bit = {k: 1 << i for i, k in enumerate(ids)}
    pen = {k.id: k.penalty for k in inst.tasks}
    full = sum(pen.values())
    best = {0: 0.0}
    for r in sorted(inst.crew, key=lambda r: r.id):
        opts = [(sum(bit[k] for k in key), c - sum(pen[k] for k in key)) for key, c in toy_duties(inst, r)]
        nxt = dict(best)  # member off
        for mask, val in best.items():
            for m2, c in opts:
                if mask & m2:
                    continue
                v = val + c
                if v < nxt.get(mask | m2, np.inf):
                    nxt[mask | m2] = v
        best = nxt
    return full + min(best.values())


def random_toy(seed: int, n_tasks: int = 8, n_crew: int = 3) -> Instance:
    """One line, one day, up to eight tasks and three members; the horizon fits two duty frames."""
    rng = np.random.default_rng(seed)
    params = Params(c_r=0.25)
    run = int(rng.integers(30, 61))
    line = Line("L1", ("A", "B"), run, 40, (0, 660 - run))
    tasks = []
    for i in range(n_tasks):
        dep = int(rng.integers(20, 640 - run))
        o, o2 = ("A", "B") if rng.random() < 0.5 else ("B", "A")
        tasks.append(TrainTask(i, "L1", o, dep, o2, dep + run, task_penalty(dep, dep + run, params), 0))
    crew = []
    for r in range(n_crew):
        pref = [d for d in ("A", "B") if rng.random() < 0.6] or ["A"]
        crew.append(CrewMember(r, frozenset({"L1"}), frozenset(pref)))
    inst = Instance(1, (0, 660), (line,), (), tuple(tasks), tuple(crew), params)
    inst.validate()
    return inst


# ---------------------------------------------------------------- LP

def tableau_lp(c, A, senses, b, big=1e6):
    """Dense big-M tableau simplex with Bland's rule; returns (status, objective)."""
    c = np.asarray(c, float)
    A = np.asarray(A, float)
    b = np.asarray(b, float)
    m, n = A.shape
    A = A.copy()
    b = b.copy()
    senses = list(senses)
    for i in range(m):
        if b[i] < 0:
            A[i] *= -1
            b[i] *= -1
            senses[i] = {"<=": ">=", ">=": "<=", "=": "="}[senses[i]]
    cols = [A]
    cost = [c]
    basis = []
    extra = 0
    for i, s in enumerate(senses):
        if s == "<=":
            e = np.zeros((m, 1)); e[i] = 1
            cols.append(e); cost.append([0.0]); basis.append(n + extra); extra += 1
        elif s == ">=":
            e = np.zeros((m, 2)); e[i, 0] = -1; e[i, 1] = 1
            cols.append(e); cost.append([0.0, big]); basis.append(n + extra + 1); extra += 2
        else:
            e = np.zeros((m, 1)); e[i] = 1
            cols.append(e); cost.append([big]); basis.append(n + extra); extra += 1
    T = np.hstack(cols)
    cc = np.concatenate(cost)
    N = T.shape[1]
    artificial = np.zeros(N, bool)
    for j in range(n, N):
        if cc[j] == big:
            artificial[j] = True
    tab = np.hstack([T, b[:, None]])
    for _ in range(5000):
        cb = cc[basis]
        red = cc - cb @ tab[:, :N]
        enter = next((j for j in range(N) if red[j] < -1e-9), None)
        if enter is None:
            x = np.zeros(N)
            x[basis] = tab[:, N]
            if np.any(x[artificial] > 1e-7):
                return "infeasible", np.nan
            return "optimal", float(c @ x[:n])
        col = tab[:, enter]
        rows = [i for i in range(m) if col[i] > 1e-12]
        if not rows:
            return "unbounded", -np.inf
        r = min(rows, key=lambda i: (tab[i, N] / col[i], basis[i]))
        tab[r] /= tab[r, enter]
        for i in range(m):
            if i != r:
                tab[i] -= tab[i, enter] * tab[r]
        basis[r] = enter
    return "iteration_limit", np.nan


def brute_force_bip(c, A, b):
    """Exhaustive 0/1 enumeration for <= rows."""
    c = np.asarray(c, float)
    A = np.asarray(A, float)
    best = np.inf
    for bits in itertools.product((0, 1), repeat=len(c)):
        x = np.array(bits, float)
        if np.all(A @ x <= np.asarray(b) + 1e-9):
            best = min(best, float(c @ x))
    return best


# ---------------------------------------------------------------- roster rules

def brute_violations(inst: Instance, assignment: dict, replan=None) -> set:
    """Set of (rule, crew id) obtained by testing every operating-rule clause directly.

    Over-covered tasks are charged to crew id -1, as the validator does.
    ``replan`` is (day, t_bar, original assignment).
    """
    p = inst.params
    frame_start = {f.index: f.start for f in enumerate_duty_frames(p, inst.horizon)}
    task = {k.id: k for k in inst.tasks}
    members = {r.id: r for r in inst.crew}
    found = set()
    for rid in members:
        if rid not in assignment:
            found.add(("assignment", rid))
    uses: dict = {}
    for rid, steps in assignment.items():
        if rid not in members:
            found.add(("assignment", rid))
            continue
        quals = members[rid].qualification
        if [s.day for s in steps] != sorted(s.day for s in steps):
            found.add(("sign-in/out", rid))
        by_day: dict = {}
        for s in steps:
            by_day.setdefault(s.day, []).append(s)
            if s.arc_kind == "train":
                uses[s.task] = uses.get(s.task, 0) + 1
        for d, ds in by_day.items():
            for rule in _day_clauses(inst, p, frame_start, task, quals, d, ds):
                found.add((rule, rid))
        if replan is None:
            if len(by_day) > inst.max_work_days:
                found.add(("day-off", rid))
            if sum(s.arc_kind == "deadhead" for s in steps) > p.n_tf:
                found.add(("deadhead", rid))
        else:
            day, t_bar, orig = replan
            before: dict = {}
            for s in orig.get(rid, ()):
                before.setdefault(s.day, []).append(s)
            for d in set(before) | set(by_day):
                o, n = before.get(d, []), by_day.get(d, [])
                if d != day:
                    if o != n:
                        found.add(("replanned-duty", rid))
                    continue
                if (o[0].duty if o else None) != (n[0].duty if n else None):
                    found.add(("replanned-duty", rid))
                if _cut(o, t_bar) != _cut(n, t_bar):
                    found.add(("replanned-task", rid))
    for k, n in uses.items():
        if k in task and n > task[k].demand:
            found.add(("train-service", -1))
    return found


def _cut(steps, t_bar):
    out = []
    for s in steps:
        if s.t_from >= t_bar:
            break
        out.append(s if not (s.arc_kind == "idle" and s.t_to > t_bar) else
                   type(s)(**{**s.__dict__, "t_to": t_bar}))
    return out


def _day_clauses(inst, p, frame_start, task, quals, d, ds):
    kinds = [s.arc_kind for s in ds]
    duty = ds[0].duty
    a = frame_start.get(duty, ds[0].t_from)
    # structure of the working day
    if len({s.duty for s in ds}) > 1 or duty not in frame_start:
        yield "sign-in/out"
    if not (kinds[0] == "signin" and kinds[-1] == "signout" and kinds.count("signin") == 1
            and kinds.count("signout") == 1):
        yield "sign-in/out"
    known = {"signin", "train", "rest", "meal", "idle", "deadhead", "signout"}
    for s in ds:
        if (s.arc_kind not in known or s.t_to <= s.t_from or not (a <= s.t_from and s.t_to <= a + p.H)
                or (s.arc_kind not in ("train", "deadhead") and s.depot_from != s.depot_to)):
            yield "sign-in/out"
    if any(x.t_to != y.t_from or x.depot_to != y.depot_from for x, y in zip(ds, ds[1:])):
        yield "sign-in/out"
    if kinds[0] == "signin" and (ds[0].t_from != a or ds[0].t_to - ds[0].t_from != p.t_si):
        yield "sign-in/out"
    if kinds[-1] == "signout" and ds[-1].t_to - ds[-1].t_from != p.t_so:
        yield "sign-in/out"
    # working time
    if not p.t_min <= ds[-1].t_to - ds[0].t_from <= p.t_max:
        yield "working-time"
    # rest between consecutive trains, and rest steps of the right length
    tr = [s for s in ds if s.arc_kind == "train"]
    if any(y.t_from - x.t_to < p.t_rt for x, y in zip(tr, tr[1:])):
        yield "rest-break"
    if any(s.arc_kind == "rest" and s.t_to - s.t_from != p.t_rt for s in ds):
        yield "rest-break"
    # exactly one meal inside its window
    ml = [s for s in ds if s.arc_kind == "meal"]
    if len(ml) != 1 or any(m.t_to - m.t_from != p.t_ml or m.t_from < a + p.t_mb or m.t_to > a + p.t_me
                           for m in ml):
        yield "meal-break"
    for s in ds:
        if s.arc_kind in ("train", "deadhead"):
            used = {s.line} | ({s.line_to} if s.line_to is not None else set())
            if not used <= quals:
                yield "qualification"
        if s.arc_kind == "train":
            k = task.get(s.task)
            if k is None or (k.day, k.line, k.dep_depot, k.dep_time, k.arr_depot, k.arr_time) != (
                    d, s.line, s.depot_from, s.t_from, s.depot_to, s.t_to):
                yield "train-service"
        if s.arc_kind == "deadhead" and not _deadhead_ok(inst, p, task, d, s):
            yield "deadhead"


def _deadhead_ok(inst, p, task, d, s):
    k1, k2 = task.get(s.task), task.get(s.task_to)
    if k1 is None or k2 is None or k1.day != d or k2.day != d or k1.line == k2.line:
        return False
    if (k1.line, k2.line, k1.dep_time, k1.dep_depot, k2.arr_time, k2.arr_depot) != (
            s.line, s.line_to, s.t_from, s.depot_from, s.t_to, s.depot_to):
        return False

    def passing(k, f):
        first = inst.line(k.line).depots[0]
        frac = f if k.dep_depot == first else 1 - f
        return k.dep_time + frac * (k.arr_time - k.dep_time)

    for t in inst.transfers:
        if (t.line_a, t.line_b) == (k1.line, k2.line) and passing(k2, t.frac_b) >= passing(k1, t.frac_a) + p.t_tf:
            return True
        if (t.line_b, t.line_a) == (k1.line, k2.line) and passing(k2, t.frac_a) >= passing(k1, t.frac_b) + p.t_tf:
            return True
    return False


# ---------------------------------------------------------------- random small networks

def random_small_view(seed: int):
    """A small network view with random dual-like cost noise: (view, Limits).

    Variants: one line and one day; two lines with a transfer (deadheads);
    two days with a day off required; a restricted replanning view.
    """
    from metrocrew.htsn import (ExtraPoint, NetworkView, V_ARRIVE, V_STATE, Resumption,
                                build_network, build_restricted_subnetwork)
    from metrocrew.model import TransferStation
    from metrocrew.pulse import Limits

    rng = np.random.default_rng(seed)
    kind = seed % 4
    p = Params(c_r=0.25, n_tf=int(rng.integers(0, 2)))
    lines = [Line("L1", ("A", "B"), 40, 30, (0, 560))]
    transfers = ()
    n_days = 1
    if kind == 1:
        lines.append(Line("L2", ("C", "D"), 40, 30, (0, 560)))
        transfers = (TransferStation("L1", "L2", "X", float(rng.uniform(0.2, 0.8)), float(rng.uniform(0.2, 0.8))),)
    if kind == 2:
        n_days = 2
    tasks = []
    n = int(rng.integers(1, 5 if kind != 2 else 3))
    for day in range(n_days):
        for i in range(n):
            ln = lines[int(rng.integers(len(lines)))]
            run = int(rng.integers(25, 60))
            dep = int(rng.integers(25, 500 - run))
            o, d = ln.depots if rng.random() < 0.5 else ln.depots[::-1]
            tasks.append(TrainTask(len(tasks), ln.id, o, dep, d, dep + run, task_penalty(dep, dep + run, p), day))
    crew = (CrewMember(0, frozenset(l.id for l in lines), frozenset(lines[0].depots)),)
    inst = Instance(n_days, (0, 600), tuple(lines), transfers, tuple(tasks), crew, p)
    inst.validate()
    if kind == 3:
        net0 = build_network(inst)
        cand = np.flatnonzero(np.isin(net0.v_kind, (V_STATE, V_ARRIVE)))
        v = int(rng.choice(cand))
        res = Resumption(True, int(net0.v_duty[v]), 0, int(net0.v_time[v]), net0.depots[net0.v_depot[v]],
                         "arrive" if net0.v_kind[v] == V_ARRIVE else "state", (), int(rng.integers(0, 2)))
        net = build_network(inst, extra_points=[ExtraPoint(0, res.duty, res.depot, res.time, res.kind)])
        view = build_restricted_subnetwork(net, res, 0, [l.id for l in lines])
        limits = Limits.replanning()
    else:
        net = build_network(inst)
        view = NetworkView(net)
        limits = Limits.planning(inst)
    noise = np.round(rng.normal(0, 20, net.n_arcs), 1) * (rng.random(net.n_arcs) < 0.3)
    view.add_costs(np.arange(net.n_arcs), noise)
    drop = np.flatnonzero(rng.random(net.n_arcs) < 0.05)
    if len(drop):
        view.disable(drop)
    return view, limits
