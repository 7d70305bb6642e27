"""Brute-force reference implementations used as ground truth in tests.

These are deliberately written without sharing code with the engines: the
greedy MIS below walks the kill process over an explicit adjacency structure,
the exact k-center solver enumerates center subsets, and the exact
sum-of-radii solver runs a set-cover DP over point masks. Agreement between
an engine and one of these oracles is therefore evidence, not tautology.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import BudgetExceeded

Dist = Callable[[object, object], float]


@dataclass(frozen=True)
class OracleBudget:
    """Hard caps beyond which the exact oracles refuse to run."""

    max_n: int = 14
    max_k: int = 3

    def check(self, n: int, k: int) -> None:
        if n > self.max_n or k > self.max_k:
            raise BudgetExceeded(
                f"oracle limited to n<={self.max_n}, k<={self.max_k}; got n={n}, k={k}"
            )


DEFAULT_BUDGET = OracleBudget()


def greedy_lfmis(adjacency: Mapping, ranks: Mapping, cap: int | None = None):
    """Greedy lexicographically-first MIS under the given ranks.

    Repeatedly take the minimum-rank alive vertex into the MIS and kill its
    neighbors. Returns ``(prefix, eliminator)`` where ``prefix`` is the MIS
    in rank order truncated to ``cap`` entries, and ``eliminator`` maps every
    vertex to the MIS vertex that killed it (itself, for MIS members).
    """
    order = sorted(adjacency, key=lambda v: ranks[v])
    eliminator: dict = {}
    mis: list = []
    for v in order:
        if v in eliminator:
            continue
        eliminator[v] = v
        mis.append(v)
        for u in adjacency[v]:
            if u not in eliminator:
                eliminator[u] = v
    if cap is not None:
        mis = mis[:cap]
    return mis, eliminator


def exact_kcenter(points: Sequence, dist: Dist, k: int,
                  budget: OracleBudget = DEFAULT_BUDGET):
    """Optimal discrete k-center cost by enumeration over center subsets.

    Returns ``(cost, centers)``. With ``n <= k`` every point is its own
    center at cost 0.
    """
    pts = list(points)
    n = len(pts)
    if n <= k:
        return 0.0, tuple(pts)
    budget.check(n, k)
    dmat = np.array([[dist(a, b) for b in pts] for a in pts], dtype=float)
    combos = np.array(list(itertools.combinations(range(n), k)), dtype=int)
    # cost of a subset: max over points of min distance to the subset
    costs = dmat[:, combos].min(axis=2).max(axis=0)
    best = int(costs.argmin())
    centers = tuple(pts[i] for i in combos[best])
    return float(costs[best]), centers


def exact_sum_radii(points: Sequence, dist: Dist, k: int,
                    budget: OracleBudget = DEFAULT_BUDGET) -> float:
    """Optimal k-sum-of-radii cost via a set-cover DP over point masks.

    Per-point nearest-center assignment does not minimize the sum of radii,
    so the DP enumerates (center, radius) balls, always extending the cover
    of the lowest uncovered point. Radii are drawn from the pairwise
    distances (plus zero).
    """
    pts = list(points)
    n = len(pts)
    if n == 0 or k >= n:
        return 0.0
    if k <= 0:
        raise BudgetExceeded("k must be positive")
    budget.check(n, k)
    dmat = [[dist(a, b) for b in pts] for a in pts]

    # balls_containing[i]: (radius, covered_mask) of every distinct ball that
    # contains point i; one entry per distinct radius step per center
    full = (1 << n) - 1
    balls_containing: list[list[tuple[float, int]]] = [[] for _ in range(n)]
    for c in range(n):
        order = sorted(range(n), key=lambda j: dmat[c][j])
        mask = 0
        idx = 0
        while idx < n:
            r = dmat[c][order[idx]]
            while idx < n and dmat[c][order[idx]] <= r:
                mask |= 1 << order[idx]
                idx += 1
            for j in range(n):
                if mask >> j & 1:
                    balls_containing[j].append((r, mask))

    INF = float("inf")
    dp = {0: 0.0}
    best = INF
    for _ in range(k):
        ndp: dict[int, float] = {}
        for mask, cost in dp.items():
            rem = ~mask & full
            lowest = (rem & -rem).bit_length() - 1
            for r, ball in balls_containing[lowest]:
                nm = mask | ball
                nc = cost + r
                if nm == full:
                    best = min(best, nc)
                elif nc < ndp.get(nm, INF):
                    ndp[nm] = nc
        dp = ndp
        if not dp:
            break
    return best


def threshold_adjacency(points: Iterable, dist: Dist, r: float) -> dict:
    """Adjacency map of the r-threshold graph over the given points."""
    pts = list(points)
    adj: dict = {p: set() for p in pts}
    for i, a in enumerate(pts):
        for b in pts[i + 1:]:
            if dist(a, b) <= r:
                adj[a].add(b)
                adj[b].add(a)
    return adj
