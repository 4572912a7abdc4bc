"""Dense revised simplex with duals, and best-first branch and bound for binaries.

Sign convention (minimisation): a <= row has a dual <= 0, a >= row a dual >= 0,
an = row a free dual; strong duality reads c.x = b.y.
Basis entries: j >= 0 is structural column j, -(i+1) is the slack of row i.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

FEAS_TOL = 1e-7
OPT_TOL = 1e-9
INT_TOL = 1e-6
PIV_TOL = 1e-9
REFACTOR = 64
BLAND_AFTER = 50   # consecutive degenerate pivots before switching to Bland's rule
DIVE_EVERY = 100   # nodes between diving passes inside the tree


@dataclass
class LpModel:
    c: np.ndarray
    A: np.ndarray
    senses: Sequence[str]
    b: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.asarray(self.A, dtype=float).reshape(len(self.b), len(self.c))
        self.b = np.asarray(self.b, dtype=float)
        self.senses = list(self.senses)
        for s in self.senses:
            if s not in ("<=", ">=", "="):
                raise ValueError(f"unknown sense {s!r}")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.b))):
            raise ValueError("model coefficients must be finite")

    @property
    def shape(self):
        return self.A.shape

    def to_lp_text(self) -> str:
        """LP-format dump for debugging."""
        def expr(row):
            terms = [f"{v:+.12g} x{j}" for j, v in enumerate(row) if v != 0]
            return " ".join(terms) if terms else "0"
        out = ["Minimize", " obj: " + expr(self.c), "Subject To"]
        for i, (row, s, rhs) in enumerate(zip(self.A, self.senses, self.b)):
            out.append(f" r{i}: {expr(row)} {s} {rhs:.12g}")
        out.append("End")
        return "\n".join(out) + "\n"


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded | iteration_limit
    x: np.ndarray
    duals: np.ndarray
    objective: float
    basis: list[int] | None = None
    iterations: int = 0
    reduced_costs: np.ndarray | None = None


def _phase(A, b, c, basis, can_enter, is_art, max_iter):
    m = A.shape[0]
    B = A[:, basis]
    Binv = np.linalg.inv(B)
    xB = Binv @ b
    streak = 0
    it = 0
    while it < max_iter:
        if it and it % REFACTOR == 0:
            Binv = np.linalg.inv(A[:, basis])
            xB = Binv @ b
        y = c[basis] @ Binv
        d = c - y @ A
        d[~can_enter] = 0.0
        d[basis] = 0.0
        neg = np.flatnonzero(d < -OPT_TOL)
        if len(neg) == 0:
            return "optimal", basis, Binv, xB, it
        q = int(neg[0]) if streak > BLAND_AFTER else int(neg[np.argmin(d[neg])])
        u = Binv @ A[:, q]
        r = -1
        theta = np.inf
        for i in range(m):
            if u[i] > PIV_TOL:
                t = max(xB[i], 0.0) / u[i]
            elif is_art[basis[i]] and u[i] < -PIV_TOL and xB[i] <= FEAS_TOL:
                t = 0.0  # a zero artificial must not grow
            else:
                continue
            if t < theta - 1e-12 or (abs(t - theta) <= 1e-12 and basis[i] < basis[r]):
                theta, r = t, i
        if r < 0:
            return "unbounded", basis, Binv, xB, it
        xB = xB - theta * u
        xB[r] = theta
        piv = Binv[r] / u[r]
        Binv -= np.outer(u, piv)
        Binv[r] = piv
        basis[r] = q
        streak = streak + 1 if theta <= 1e-12 else 0
        it += 1
    return "iteration_limit", basis, Binv, xB, it


def _standard_form(model: LpModel):
    """Rows flipped to a non-negative rhs, one slack or surplus column per inequality."""
    c, A0, b0 = model.c, model.A, model.b
    m, n = A0.shape
    sign = np.where(b0 < 0, -1.0, 1.0)
    A = A0 * sign[:, None]
    b = b0 * sign
    senses = []
    for s, f in zip(model.senses, sign):
        if f < 0 and s != "=":
            s = "<=" if s == ">=" else ">="
        senses.append(s)
    slack_of = {}
    cols = [A]
    for i, s in enumerate(model.senses):
        if s != "=":
            e = np.zeros((m, 1))
            e[i, 0] = (1.0 if senses[i] == "<=" else -1.0)
            slack_of[i] = n + len(slack_of)
            cols.append(e)
    return np.hstack(cols), A, b, sign, senses, slack_of


def solve_lp(model: LpModel, basis: Sequence[int] | None = None, max_iter: int = 50_000) -> LpSolution:
    c = model.c
    m, n = model.A.shape
    full, A, b, sign, senses, slack_of = _standard_form(model)
    n_s = len(slack_of)
    if m == 0:
        if np.any(c < -OPT_TOL):
            return LpSolution("unbounded", np.zeros(n), np.zeros(0), -np.inf)
        return LpSolution("optimal", np.zeros(n), np.zeros(0), 0.0, [], 0, c.copy())
    start = None
    if basis is not None and len(basis) == m:
        start = [j if j >= 0 else slack_of.get(-j - 1, -1) for j in basis]
        if min(start) < 0 or len(set(start)) != m:
            start = None
    iters = 0
    if start is not None:
        Bw = full[:, start]
        try:
            xw = np.linalg.solve(Bw, b)
            if not np.allclose(Bw @ xw, b, atol=1e-9, rtol=0):
                xw = None
        except np.linalg.LinAlgError:
            xw = None
        if xw is None or np.any(xw < -FEAS_TOL):
            start = None
    if start is None:
        # cold start: slacks where they fit, artificials elsewhere
        art_rows = [i for i in range(m) if senses[i] != "<="]
        art = np.zeros((m, len(art_rows)))
        for k, i in enumerate(art_rows):
            art[i, k] = 1.0
        full = np.hstack([full, art])
        N = full.shape[1]
        is_art = np.zeros(N, dtype=bool)
        is_art[n + n_s:] = True
        bas = []
        ak = iter(range(n + n_s, N))
        for i in range(m):
            bas.append(slack_of[i] if senses[i] == "<=" else next(ak))
        if art_rows:
            c1 = np.zeros(N)
            c1[is_art] = 1.0
            st, bas, Binv, xB, it = _phase(full, b, c1, bas, np.ones(N, dtype=bool), is_art, max_iter)
            iters += it
            if st == "iteration_limit":
                return LpSolution(st, np.zeros(n), np.zeros(m), np.nan, None, iters)
            if float(c1[bas] @ xB) > FEAS_TOL * max(1.0, np.abs(b).max()):
                return LpSolution("infeasible", np.zeros(n), np.zeros(m), np.nan, None, iters)
    else:
        N = full.shape[1]
        is_art = np.zeros(N, dtype=bool)
        bas = list(start)
    c2 = np.zeros(N)
    c2[:n] = c
    st, bas, Binv, xB, it = _phase(full, b, c2, bas, ~is_art, is_art, max_iter - iters)
    iters += it
    if st != "optimal":
        return LpSolution(st, np.zeros(n), np.zeros(m), -np.inf if st == "unbounded" else np.nan, None, iters)
    # one refactor for clean values
    Binv = np.linalg.inv(full[:, bas])
    xB = Binv @ b
    x = np.zeros(N)
    x[bas] = xB
    x = np.where(np.abs(x) < 1e-12, 0.0, x)
    y = c2[bas] @ Binv
    rc = c - y @ A
    duals = y * sign
    inv_slack = {v: i for i, v in slack_of.items()}
    enc = [j if j < n else (-(inv_slack[j] + 1) if j in inv_slack else None) for j in bas]
    if any(e is None for e in enc):
        enc = None  # an artificial stayed basic on a redundant row
    xs = np.maximum(x[:n], 0.0)
    return LpSolution("optimal", xs, duals, float(c @ xs), enc, iters, rc)


def _dual_reopt(full, b, c, basis, fixed: dict[int, float], max_iter=5000):
    """Dual simplex from a dual-feasible basis; fixed columns sit at their value and never enter.

    Returns (status, basis, x_full) or None when the start is unusable.
    """
    m, N = full.shape
    basis = list(basis)
    is_fixed = np.zeros(N, dtype=bool)
    val = np.zeros(N)
    for j, v in fixed.items():
        is_fixed[j] = True
        val[j] = v
    try:
        Binv = np.linalg.inv(full[:, basis])
    except np.linalg.LinAlgError:
        return None
    streak = 0
    for it in range(max_iter):
        if it and it % REFACTOR == 0:
            Binv = np.linalg.inv(full[:, basis])
        inb = np.zeros(N, dtype=bool)
        inb[basis] = True
        nb_fixed = np.flatnonzero(is_fixed & ~inb)
        rhs = b - full[:, nb_fixed] @ val[nb_fixed] if len(nb_fixed) else b
        xB = Binv @ rhs
        y = c[basis] @ Binv
        d = c - y @ full
        if it == 0 and np.any(d[~inb & ~is_fixed] < -1e-7):
            return None
        lo = np.where(is_fixed[basis], val[basis], 0.0)
        hi = np.where(is_fixed[basis], val[basis], np.inf)
        viol = np.maximum(lo - xB, xB - hi)
        bad = np.flatnonzero(viol > FEAS_TOL)
        if len(bad) == 0:
            x = val.copy()
            x[basis] = xB
            x[~inb & ~is_fixed] = 0.0
            return "optimal", basis, x
        if streak > BLAND_AFTER:
            r = int(min(bad, key=lambda i: basis[i]))
        else:
            r = int(bad[np.argmax(viol[bad])])
        alpha = Binv[r] @ full
        up = xB[r] < lo[r]
        cand = ~inb & ~is_fixed & ((alpha < -PIV_TOL) if up else (alpha > PIV_TOL))
        ks = np.flatnonzero(cand)
        if len(ks) == 0:
            return "infeasible", basis, None
        ratio = np.maximum(d[ks], 0.0) / np.abs(alpha[ks])
        best = ratio.min()
        tie = ks[ratio <= best + 1e-12]
        k = int(tie[0]) if streak > BLAND_AFTER else int(tie[np.argmax(np.abs(alpha[tie]))])
        u = Binv @ full[:, k]
        piv = Binv[r] / u[r]
        Binv -= np.outer(u, piv)
        Binv[r] = piv
        basis[r] = k
        streak = streak + 1 if best <= 1e-12 else 0
    return None


# ---------------------------------------------------------------- branch and bound


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    fix: tuple = field(compare=False)
    basis: list | None = field(compare=False, default=None)


@dataclass
class BipSolution:
    status: str  # optimal | infeasible | node_limit
    x: np.ndarray
    objective: float
    nodes: int
    lp_bound: float


def _restricted(model: LpModel, fix: dict[int, int]):
    free = [j for j in range(len(model.c)) if j not in fix]
    ones = [j for j, v in fix.items() if v == 1]
    b = model.b - (model.A[:, ones].sum(axis=1) if ones else 0.0)
    const = float(model.c[ones].sum()) if ones else 0.0
    sub = LpModel(model.c[free], model.A[:, free], model.senses, b)
    return sub, free, const


def _solve_node(model, fix, basis):
    sub, free, const = _restricted(model, fix)
    warm = None
    if basis is not None:
        pos = {j: i for i, j in enumerate(free)}
        warm = [pos.get(j, None) if j >= 0 else j for j in basis]
        if any(w is None for w in warm):
            warm = None
    sol = solve_lp(sub, warm)
    x = np.zeros(len(model.c))
    if sol.status == "optimal":
        x[free] = sol.x
        for j, v in fix.items():
            x[j] = v
        back = None
        if sol.basis is not None:
            back = [free[j] if j >= 0 else j for j in sol.basis]
        return sol.status, x, sol.objective + const, back
    return sol.status, x, np.inf, None


def _solve_node_warm(model, std, fix, basis):
    """Child relaxation reoptimised from the parent basis; cold restricted solve as fallback."""
    full, _, b, _, _, slack_of = std
    n = len(model.c)
    bas = None
    if basis is not None:
        bas = [j if j >= 0 else slack_of.get(-j - 1) for j in basis]
        if any(j is None for j in bas):
            bas = None
    out = None
    if bas is not None:
        c = np.zeros(full.shape[1])
        c[:n] = model.c
        out = _dual_reopt(full, b, c, bas, {j: float(v) for j, v in fix.items()})
    if out is None:
        return _solve_node(model, fix, None)
    st, bas, xf = out
    if st != "optimal":
        return st, np.zeros(n), np.inf, None
    inv_slack = {v: i for i, v in slack_of.items()}
    x = np.where(np.abs(xf[:n]) < 1e-12, 0.0, xf[:n])
    x = np.maximum(x, 0.0)
    enc = [j if j < n else -(inv_slack[j] + 1) for j in bas]
    return "optimal", x, float(model.c @ x), enc


def is_feasible(model: LpModel, x: np.ndarray, tol: float = FEAS_TOL) -> bool:
    r = model.A @ x - model.b
    for ri, sense in zip(r, model.senses):
        if (sense == "<=" and ri > tol) or (sense == ">=" and ri < -tol) or (sense == "=" and abs(ri) > tol):
            return False
    return bool(np.all(x >= -tol))


def _round_greedy(model, x, binaries):
    """Keep binaries at one, add fractional ones by value, then fill with any negative-cost column that fits."""
    y = np.zeros(len(model.c))
    y[[j for j in binaries if x[j] > 1 - INT_TOL]] = 1.0
    if not is_feasible(model, y):
        return None
    act = model.A @ y
    le = np.array([s == "<=" for s in model.senses])
    cap = np.where(le, model.b + FEAS_TOL, np.inf)
    frac = sorted((j for j in binaries if INT_TOL < x[j] < 1 - INT_TOL), key=lambda j: (-x[j], j))
    rest = sorted((j for j in binaries if y[j] == 0 and model.c[j] < 0), key=lambda j: (model.c[j], j))
    for j in frac + rest:
        if y[j] or model.c[j] > 0:
            continue
        a = model.A[:, j]
        if np.all(act + a <= cap):
            y[j] = 1.0
            act += a
    return y if is_feasible(model, y) else None


def _improve(model, y, binaries, max_pass=20):
    """Swap search for packing models (all <= rows, A >= 0): add a column, evict what it collides with."""
    if any(s != "<=" for s in model.senses) or np.any(model.A < 0):
        return y
    y = y.copy()
    A, c = model.A, model.c
    cap = model.b + FEAS_TOL
    act = A @ y
    order = sorted((j for j in binaries if c[j] < 0), key=lambda j: (c[j], j))
    for _ in range(max_pass):
        moved = False
        for j in order:
            if y[j]:
                continue
            after = act + A[:, j]
            out: list[int] = []
            for r in np.flatnonzero(after > cap):
                while after[r] > cap[r]:
                    inrow = [k for k in np.flatnonzero((y > 0.5) & (A[r] > 0)) if k not in out]
                    if not inrow:
                        break
                    k = max(inrow, key=lambda k: (c[k], k))
                    out.append(k)
                    after -= A[:, k]
            if np.any(after > cap) or c[j] - sum(c[k] for k in out) >= -1e-9:
                continue
            y[j] = 1.0
            y[out] = 0.0
            act = after
            moved = True
        if not moved:
            break
    return y


def _dive(model, std, binaries, x, basis, max_depth):
    """Fix the largest fractional binary to one and resolve, until integral."""
    fix: dict[int, int] = {}
    for _ in range(max_depth):
        frac = [j for j in binaries if min(abs(x[j]), abs(x[j] - 1.0)) > INT_TOL]
        if not frac:
            return x
        j = max(frac, key=lambda j: (x[j], -j))
        for v in (1, 0):
            fix[j] = v
            st, cx, _, cb = _solve_node_warm(model, std, fix, basis)
            if st == "optimal":
                x, basis = cx, cb
                break
        else:
            return None
    return None


def solve_bip(model: LpModel, binaries: Sequence[int] | None = None, node_limit: int = 100_000,
              dive: bool = True) -> BipSolution:
    """Best-first branch and bound; branch on the lowest fractional index, 0-branch first.

    Rounding and a diving pass seed the incumbent. The result is exact unless
    the node limit is hit (status ``node_limit``, best incumbent returned).
    """
    binaries = list(range(len(model.c))) if binaries is None else sorted(binaries)
    st, x, obj, basis = _solve_node(model, {}, None)
    if st == "unbounded":
        raise ValueError("LP relaxation is unbounded")
    if st != "optimal":
        return BipSolution("infeasible", x, np.inf, 1, np.inf)
    root = obj
    std = _standard_form(model)
    best_x, best = None, np.inf
    for cand in (_round_greedy(model, x, binaries),
                 _dive(model, std, binaries, x, basis, len(binaries) + 1) if dive else None):
        if cand is None:
            continue
        cand = cand.copy()
        cand[binaries] = np.round(cand[binaries])
        cand = _improve(model, cand, binaries)
        if is_feasible(model, cand) and float(model.c @ cand) < best - 1e-9:
            best, best_x = float(model.c @ cand), cand
    heap = [_Node(obj, 0, (), basis)]
    cache = {(): (x, obj)}
    seq = 1
    nodes = 1
    truncated = False
    next_deep = DIVE_EVERY
    while heap:
        node = heapq.heappop(heap)
        if node.bound >= best - 1e-9:
            break
        x, obj = cache.pop(node.fix)
        frac = [j for j in binaries if min(abs(x[j]), abs(x[j] - 1.0)) > INT_TOL]
        if not frac:
            best, best_x = obj, x
            continue
        deep = nodes >= next_deep
        heur = [_round_greedy(model, x, binaries)]
        if deep:
            next_deep += DIVE_EVERY
            if dive:
                heur.append(_dive(model, std, binaries, x, node.basis, len(binaries) + 1))
        for cand in heur:
            if cand is not None:
                cand = np.round(cand)
                if deep:
                    cand = _improve(model, cand, binaries)
                v = float(model.c @ cand)
                if v < best - 1e-9 and is_feasible(model, cand):
                    best, best_x = v, cand
        if node.bound >= best - 1e-9:
            continue
        j = frac[0]
        for v in (0, 1):
            fix = dict(node.fix)
            fix[j] = v
            key = tuple(sorted(fix.items()))
            if nodes >= node_limit:
                break
            st, cx, cobj, cb = _solve_node_warm(model, std, fix, node.basis)
            nodes += 1
            if st != "optimal" or cobj >= best - 1e-9:
                continue
            cache[key] = (cx, cobj)
            heapq.heappush(heap, _Node(cobj, seq, key, cb))
            seq += 1
        if nodes >= node_limit:
            log.warning("branch and bound hit the node limit (%d)", node_limit)
            truncated = True
            break
    if best_x is None:
        return BipSolution("node_limit" if truncated else "infeasible", x, np.inf, nodes, root)
    status = "node_limit" if truncated else "optimal"
    xr = best_x.copy()
    xr[binaries] = np.round(xr[binaries])
    return BipSolution(status, xr, float(model.c @ xr), nodes, root)
