"""Dynamic k-center by running one LFMIS instance per threshold scale.

The engine feeds every update to every scale of a geometric ladder and reads
the solution off the smallest scale whose maintained independent set has at
most k vertices. Membership queries are O(1) lookups in that scale's leader
map; the scale just below the winning one holds k+1 pairwise-far vertices
certifying the (2+eps) guarantee.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .errors import Infeasible, UnknownPoint
from .lfmis import LfmisInstance
from .metric import (
    INSERT,
    DistanceOracle,
    PointId,
    ScaleLadder,
    StreamStats,
    UpdateOp,
    derive_seed,
)


@dataclass
class KCenterSolution:
    """Snapshot solution: winning scale cost bound, centers, point-to-center map."""

    cost_estimate: float
    centers: tuple
    assignment: dict
    scale_index: int | None = None
    scale_r: float | None = None

    @property
    def num_centers(self) -> int:
        return len(self.centers)


def threads_from_env(default: int = 1) -> int:
    raw = os.environ.get("DYNCLUST_THREADS", "")
    try:
        val = int(raw)
    except ValueError:
        return default
    return max(1, val)


class RestartWrapper:
    """High-probability runtime wrapper around one LFMIS instance.

    Counts elementary operations (queue traffic plus edge queries) and, when
    the cumulative count exceeds ``budget_factor * t * expected_cost``,
    re-instantiates the inner instance with fresh ranks and replays the
    active vertex set. Replays themselves count toward the budget, so a
    restart may cascade; ``max_restarts_per_update`` bounds the cascade.
    """

    def __init__(self, inner: LfmisInstance, expected_cost: float,
                 budget_factor: float = 4.0, seed: int = 0,
                 max_restarts_per_update: int = 50):
        self.inner = inner
        self.expected_cost = expected_cost
        self.budget_factor = budget_factor
        self._seed = seed
        self._incarnation = 0
        self.max_restarts_per_update = max_restarts_per_update
        self.restarts = 0
        self.t = 0
        self._ops_before = 0  # ops spent by dead incarnations
        self._active: set = set()

    @property
    def ops_total(self) -> int:
        return self._ops_before + self.inner.ops_total

    def process_update(self, op: UpdateOp) -> LfmisInstance:
        self.t += 1
        if op.kind == INSERT:
            self._active.add(op.id)
        else:
            self._active.discard(op.id)
        self.inner.process_update(op)
        budget = self.budget_factor * self.t * self.expected_cost
        cascades = 0
        while self.ops_total > budget and cascades < self.max_restarts_per_update:
            self._restart()
            cascades += 1
        return self.inner

    def _restart(self) -> None:
        self.restarts += 1
        self._incarnation += 1
        # bank the dead incarnation's ops, then let the replay accumulate fresh
        self._ops_before += self.inner.ops_total
        self.inner.queue_insertions = 0
        self.inner.edge_queries = 0
        self.inner.rebuild(self._active,
                           seed=derive_seed(self._seed, "restart", self._incarnation))


class KCenterEngine:
    """Fully dynamic (2+eps)-approximate k-center over a metric oracle."""

    def __init__(self, oracle: DistanceOracle, k: int, eps: float,
                 r_min: float, r_max: float, seed: int = 0,
                 threads: int = 1, restart_budget: float | None = None,
                 cost_factor: float = 1.0):
        self.oracle = oracle
        self.k = k
        self.eps = eps
        self.ladder = ScaleLadder.build(eps, r_min, r_max)
        self.stats = StreamStats()
        self.cost_factor = cost_factor
        self._pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
        self.scales: list = []
        for i, r in enumerate(self.ladder.scales):
            inst = LfmisInstance(
                k,
                edge_oracle=self._edge_fn(r),
                seed=derive_seed(seed, "scale", i),
            )
            if restart_budget is not None:
                inst = RestartWrapper(inst, restart_budget, seed=derive_seed(seed, "wrap", i))
            self.scales.append(inst)
        self._winning: int | None = None
        self._solution: KCenterSolution | None = None

    def _edge_fn(self, r: float):
        oracle = self.oracle
        return lambda a, b: oracle.distance(a, b) <= r

    def _instance(self, i: int) -> LfmisInstance:
        s = self.scales[i]
        return s.inner if isinstance(s, RestartWrapper) else s

    @property
    def restarts(self) -> int:
        return sum(s.restarts for s in self.scales if isinstance(s, RestartWrapper))

    # -- updates ----------------------------------------------------------

    def update(self, op: UpdateOp) -> KCenterSolution:
        if op.kind == INSERT:
            self.oracle.add_point(op.id, op.coords)
        self.stats.apply_update(op)
        if self._pool is not None:
            list(self._pool.map(lambda s: s.process_update(op), self.scales))
        else:
            for s in self.scales:
                s.process_update(op)
        self._solution = self._select_solution()
        return self._solution

    def _select_solution(self) -> KCenterSolution:
        active = self.stats.active
        if len(active) <= self.k:
            self._winning = None
            return KCenterSolution(
                cost_estimate=0.0,
                centers=tuple(sorted(active, key=str)),
                assignment={p: p for p in active},
            )
        for i, r in enumerate(self.ladder.scales):
            inst = self._instance(i)
            if inst.solution_valid:
                self._winning = i
                centers = tuple(inst.alg_vertices())
                assignment = {
                    v: (inst.leader[v] if inst.leader.get(v) is not None else v)
                    for v in inst.rank
                }
                return KCenterSolution(
                    cost_estimate=r * self.cost_factor,
                    centers=centers,
                    assignment=assignment,
                    scale_index=i,
                    scale_r=r,
                )
        raise Infeasible(
            "no scale produced a MIS of size <= k; the ladder does not reach r_max"
        )

    # -- queries ------------------------------------------------------------

    def membership_query(self, p: PointId) -> PointId:
        if p not in self.stats.active:
            raise UnknownPoint(f"point {p!r} is not active")
        if self._winning is None:
            return p  # degenerate regime: every point is a center
        inst = self._instance(self._winning)
        led = inst.leader.get(p)
        return p if led is None else led

    def enumerate_cluster(self, p: PointId) -> list:
        center = self.membership_query(p)
        if self._winning is None:
            return [center]
        inst = self._instance(self._winning)
        return [center] + sorted(inst.followers_of(center), key=str)

    # -- diagnostics ----------------------------------------------------------

    def realized_cost(self) -> float:
        """Max assignment distance, recomputed with uncounted distance calls."""
        if self._solution is None or not self._solution.assignment:
            return 0.0
        return max(
            self.oracle.raw_distance(p, c)
            for p, c in self._solution.assignment.items()
        )

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
