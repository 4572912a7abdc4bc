"""Qualification families, Hall feasibility and the crew-to-path assignment."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import CrewMember
from .roster import PathStep, depot_events


class AssignmentError(RuntimeError):
    pass


def requirement_set(steps: Sequence[PathStep]) -> frozenset:
    out = set()
    for s in steps:
        if s.arc_kind in ("train", "deadhead"):
            out.add(s.line)
            if s.line_to is not None:
                out.add(s.line_to)
    return frozenset(out)


def downward_closure(quals: Iterable[frozenset]) -> list[frozenset]:
    out = set()
    for q in quals:
        q = sorted(q)
        for n in range(1, len(q) + 1):
            out.update(frozenset(c) for c in combinations(q, n))
    return sorted(out, key=lambda q: (len(q), sorted(q)))


def superset_groups(Q: Sequence[frozenset]) -> dict[frozenset, frozenset]:
    return {q: frozenset(q2 for q2 in Q if q <= q2) for q in Q}


def enumerate_families(Q: Sequence[frozenset]) -> list[frozenset]:
    """Distinct unions of nonempty collections of superset groups.

    Unions are built incrementally so duplicates never multiply.
    """
    groups = list(dict.fromkeys(superset_groups(Q).values()))
    fams: set[frozenset] = set()
    for g in groups:
        fams |= {f | g for f in fams}
        fams.add(g)
    return sorted(fams, key=lambda S: (len(S), sorted(sorted(q) for q in S)))


@dataclass
class QualificationUniverse:
    Q: list[frozenset]
    pools: dict[frozenset, int]
    families: list[frozenset]

    @classmethod
    def from_crew(cls, crew: Sequence[CrewMember]) -> "QualificationUniverse":
        Q = downward_closure(r.qualification for r in crew)
        pools = {q: 0 for q in Q}
        for r in crew:
            pools[r.qualification] += 1
        return cls(Q, pools, enumerate_families(Q))

    def families_containing(self, q: frozenset) -> list[int]:
        return [i for i, S in enumerate(self.families) if q in S]

    def capacity(self, i: int) -> int:
        return sum(self.pools[q] for q in self.families[i])


def check_hall(counts: Mapping[frozenset, int], pools: Mapping[frozenset, int],
               families: Sequence[frozenset]) -> bool:
    """Whether paths with these requirement counts can be matched to distinct capable members."""
    for S in families:
        if sum(counts.get(q, 0) for q in S) > sum(pools.get(q, 0) for q in S):
            return False
    return True


def cost_matrix(crew: Sequence[CrewMember], reqs: Sequence[frozenset], events: Sequence[Sequence[str]],
                lambda_o: float) -> np.ndarray:
    """Rows are members, columns paths; inf where the member lacks a required line."""
    C = np.full((len(crew), len(reqs)), np.inf)
    for i, r in enumerate(crew):
        for j, (q, ev) in enumerate(zip(reqs, events)):
            if q <= r.qualification:
                C[i, j] = lambda_o * sum(1 for o in ev if o not in r.preferred_depots)
    return C


def solve_assignment(C: np.ndarray) -> tuple[np.ndarray, float]:
    """Minimum-cost perfect matching; returns (column of each row, total cost)."""
    C = np.asarray(C, dtype=float)
    if C.shape[0] != C.shape[1]:
        raise AssignmentError(f"cost matrix must be square, got {C.shape}")
    if C.size == 0:
        return np.zeros(0, dtype=np.int64), 0.0
    try:
        rows, cols = linear_sum_assignment(C)
    except ValueError as e:
        raise AssignmentError(f"no finite perfect matching: {e}") from None
    total = float(C[rows, cols].sum())
    if not np.isfinite(total):
        raise AssignmentError("no finite perfect matching")
    out = np.empty(len(rows), dtype=np.int64)
    out[rows] = cols
    return out, total


def path_events(steps: Sequence[PathStep]) -> list[str]:
    return depot_events(steps)
