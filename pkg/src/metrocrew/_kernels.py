"""Search kernels. Compiled with numba unless METROCREW_NO_NUMBA is set.

The same source runs in both modes, so the plain-Python fallback is the
reference the benchmark compares against.
"""

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

_OFF = os.environ.get("METROCREW_NO_NUMBA", "").lower() in ("1", "true", "yes", "on")
USE_NUMBA = numba is not None and not _OFF

INF = np.inf

R_PLAIN, R_SIGNIN, R_VIRTUAL, R_MEAL, R_SIGNOUT, R_DEADHEAD = range(6)


def njit(func):
    if USE_NUMBA:
        return numba.njit(cache=True)(func)
    return func


@njit
def step(r, s, m, dh, dh_cap, meal_preset):
    """Resource transition along one arc: (feasible, signins_left, meal, deadheads)."""
    if r == R_SIGNIN:
        if s < 1:
            return False, s, m, dh
        return True, s - 1, 0, dh
    if r == R_VIRTUAL:
        return True, s, meal_preset, dh
    if r == R_MEAL:
        if m != 0:
            return False, s, m, dh
        return True, s, 1, dh
    if r == R_SIGNOUT:
        if m != 1:
            return False, s, m, dh
        return True, s, 0, dh
    if r == R_DEADHEAD and dh_cap >= 0:
        if dh + 1 > dh_cap:
            return False, s, m, dh
        return True, s, m, dh + 1
    return True, s, m, dh


@njit
def shortest_to_sink(n_v, out_start, head, cost):
    """Unconstrained cost-to-sink; vertex ids are a topological order."""
    lb = np.full(n_v, INF)
    lb[n_v - 1] = 0.0
    for v in range(n_v - 2, -1, -1):
        best = INF
        for a in range(out_start[v], out_start[v + 1]):
            c = cost[a] + lb[head[a]]
            if c < best:
                best = c
        lb[v] = best
    return lb


@njit
def resource_bounds(n_v, out_start, head, cost, res, si_max, meal_preset):
    """Cost-to-sink per (vertex, sign-ins left, meal flag) with only the deadhead cap relaxed."""
    lb = np.full((n_v, si_max + 1, 2), INF)
    for s in range(si_max + 1):
        for m in range(2):
            lb[n_v - 1, s, m] = 0.0
    for v in range(n_v - 2, -1, -1):
        for s in range(si_max + 1):
            for m in range(2):
                best = INF
                for a in range(out_start[v], out_start[v + 1]):
                    ok, s2, m2, dh2 = step(res[a], s, m, 0, -1, meal_preset)
                    if not ok:
                        continue
                    c = cost[a] + lb[head[a], s2, m2]
                    if c < best:
                        best = c
                lb[v, s, m] = best
    return lb


@njit
def pulse(n_v, out_start, head, cost, res, lb, si_max, dh_cap, meal_preset,
          use_infeas, use_bound, use_dom, eps):
    """Depth-first constrained shortest path, children in ascending arc order.

    Returns (cost, arc positions, labels pushed). The path is the
    lexicographically smallest among minimum-cost ones: an incumbent found
    later in depth-first order must be strictly cheaper to replace it.
    """
    n_dh = dh_cap + 1 if dh_cap >= 0 else 1
    best = INF
    best_path = np.empty(n_v, dtype=np.int64)
    best_len = -1
    seeded = False
    # greedy descent along the bound gives an incumbent to prune against
    if use_bound:
        v, s, m, dh = 0, si_max, 0, 0
        c = 0.0
        ln = 0
        while v != n_v - 1:
            pick = -1
            val = INF
            ps, pm, pdh = s, m, dh
            for a in range(out_start[v], out_start[v + 1]):
                ok, s2, m2, dh2 = step(res[a], s, m, dh, dh_cap, meal_preset)
                if not ok:
                    continue
                x = cost[a] + lb[head[a], s2, m2]
                if x < val:
                    val = x
                    pick = a
                    ps, pm, pdh = s2, m2, dh2
            if pick < 0 or val == INF:
                ln = -1
                break
            best_path[ln] = pick
            ln += 1
            c += cost[pick]
            v, s, m, dh = head[pick], ps, pm, pdh
        if ln >= 0:
            best = c
            best_len = ln
            seeded = True

    dom = np.full((n_v, si_max + 1, n_dh, 2), INF) if use_dom else np.full((1, 1, 1, 1), INF)
    st_v = np.empty(n_v + 1, dtype=np.int64)
    st_p = np.empty(n_v + 1, dtype=np.int64)
    st_c = np.empty(n_v + 1)
    st_s = np.empty(n_v + 1, dtype=np.int64)
    st_m = np.empty(n_v + 1, dtype=np.int64)
    st_d = np.empty(n_v + 1, dtype=np.int64)
    st_bad = np.zeros(n_v + 1, dtype=np.int64)
    st_arc = np.empty(n_v + 1, dtype=np.int64)
    depth = 0
    st_v[0] = 0
    st_p[0] = out_start[0]
    st_c[0] = 0.0
    st_s[0] = si_max
    st_m[0] = 0
    st_d[0] = 0
    pushed = 0
    while depth >= 0:
        v = st_v[depth]
        if v == n_v - 1:
            c = st_c[depth]
            if st_bad[depth] == 0:
                if (seeded and c <= best + eps) or c < best - eps:
                    best = c
                    best_len = depth
                    for i in range(depth):
                        best_path[i] = st_arc[i + 1]
                    seeded = False
            depth -= 1
            continue
        p = st_p[depth]
        if p >= out_start[v + 1]:
            depth -= 1
            continue
        st_p[depth] = p + 1
        w = head[p]
        s, m, dh = st_s[depth], st_m[depth], st_d[depth]
        bad = st_bad[depth]
        ok, s2, m2, dh2 = step(res[p], s, m, dh, dh_cap, meal_preset)
        if not ok:
            if use_infeas:
                continue
            bad = 1
            # carry on with clamped resources so the subtree can still be walked
            if s2 > si_max:
                s2 = si_max
            if res[p] == R_SIGNIN:
                s2 = 0
                m2 = 0
            elif res[p] == R_MEAL:
                m2 = 1
            elif res[p] == R_SIGNOUT:
                m2 = 0
        c2 = st_c[depth] + cost[p]
        b = lb[w, s2, m2]
        if use_infeas and b == INF:
            continue
        if use_bound:
            if seeded:
                if c2 + b > best + eps:
                    continue
            elif c2 + b >= best - eps:
                continue
        if use_dom and bad == 0:
            di = dh2 if dh_cap >= 0 else 0
            if dom[w, s2, di, m2] <= c2 + eps:
                continue
            for s3 in range(s2 + 1):
                for d3 in range(di, n_dh):
                    if c2 < dom[w, s3, d3, m2]:
                        dom[w, s3, d3, m2] = c2
        depth += 1
        pushed += 1
        st_v[depth] = w
        st_p[depth] = out_start[w]
        st_c[depth] = c2
        st_s[depth] = s2
        st_m[depth] = m2
        st_d[depth] = dh2
        st_bad[depth] = bad
        st_arc[depth] = p
    if best_len < 0:
        return INF, best_path[:0].copy(), pushed
    return best, best_path[:best_len].copy(), pushed
