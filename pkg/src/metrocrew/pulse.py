"""Resource-constrained shortest paths over network views."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .htsn import Compiled, NetworkView

EPS = 1e-9


@dataclass(frozen=True)
class Limits:
    """Sign-in and deadhead caps; dh_cap < 0 means unlimited."""
    signins: int
    dh_cap: int

    @classmethod
    def planning(cls, instance) -> "Limits":
        return cls(instance.max_work_days, instance.params.n_tf)

    @classmethod
    def replanning(cls) -> "Limits":
        return cls(1, -1)


@dataclass(frozen=True)
class CsppResult:
    arcs: tuple[int, ...]
    cost: float
    labels: int = 0


def compute_bounds(view: NetworkView | Compiled) -> np.ndarray:
    """Exact unconstrained cost-to-sink for every vertex."""
    g = view.compile() if isinstance(view, NetworkView) else view
    return K.shortest_to_sink(g.n_vertices, g.out_start, g.head, g.cost)


def solve_cspp(view: NetworkView, limits: Limits, prune_infeasible: bool = True, prune_bound: bool = True,
               prune_dominance: bool = True, compiled: Compiled | None = None) -> CsppResult | None:
    """Minimum-cost feasible source-to-sink path, or None.

    Among equal-cost optima the lexicographically smallest arc-id sequence wins.
    """
    g = compiled or view.compile()
    lb = K.resource_bounds(g.n_vertices, g.out_start, g.head, g.cost, g.res, limits.signins,
                           view.meal_preset)
    cost, pos, pushed = K.pulse(g.n_vertices, g.out_start, g.head, g.cost, g.res, lb, limits.signins,
                                limits.dh_cap, view.meal_preset, prune_infeasible, prune_bound,
                                prune_dominance, EPS)
    if not np.isfinite(cost):
        return None
    arcs = tuple(int(a) for a in g.arc_id[pos])
    # report the cost summed in path order with the view's costs
    return CsppResult(arcs, float(cost), int(pushed))
