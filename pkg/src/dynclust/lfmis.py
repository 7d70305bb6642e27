"""Fully dynamic top-(k+1) lexicographically-first MIS with leaders.

One instance maintains, over a single threshold graph accessed through an
edge predicate, the first k+1 vertices of the greedy minimum-rank-first MIS,
a leader certificate for every clustered vertex, and a priority queue of
unclustered vertices keyed by rank. Ranks are 63-bit integers read as dyadic
rationals in [0, 1).

The unclustered queue is drained after every update while it is nonempty and
either |alg| <= k or the queue minimum outranks the alg maximum; draining
while |alg| = k+1 and the queue minimum is larger would re-enqueue the popped
vertex forever.
"""

from __future__ import annotations

import heapq
import random
from bisect import bisect_left, insort
from typing import Callable, Iterable

from .errors import DeleteOfInactive, DuplicateInsert, UnknownPoint
from .metric import INSERT, UpdateOp

RANK_BITS = 64
RANK_SCALE = float(1 << RANK_BITS)

EdgeOracle = Callable[[object, object], bool]


def rank_value(rank: int) -> float:
    """Dyadic rational in [0, 1) encoded by an integer rank."""
    return rank / RANK_SCALE


class _ScanSearch:
    """Default neighbor search: scan alg in rank order through the edge oracle."""

    def __init__(self, inst: "LfmisInstance"):
        self.inst = inst

    def on_add(self, v) -> None:
        pass

    def on_remove(self, v) -> None:
        pass

    def find(self, v, rk: int):
        """Return (u_star, S).

        u_star is the minimum-rank alg neighbor of v (None if alg has no
        neighbor). S is the full neighbor list in rank order, materialized
        only when rank(u_star) > rk; in the other branches the scan stops as
        soon as the outcome is decided.
        """
        inst = self.inst
        alg = inst._alg
        for pos, (r, u) in enumerate(alg):
            if inst._edge(v, u):
                if r < rk:
                    return u, None
                neighbors = [u]
                for r2, u2 in alg[pos + 1:]:
                    if inst._edge(v, u2):
                        neighbors.append(u2)
                return u, neighbors
        return None, None


class LfmisInstance:
    """Top-(k+1) LFMIS with a modified leader mapping over one threshold scale.

    Args:
        k: solution size bound; alg keeps at most k+1 vertices.
        edge_oracle: predicate (u, v) -> bool for "distance <= scale".
        seed: rank generator seed; replays with equal seeds are identical.
        search_factory: optional replacement neighbor-search strategy
            (the LSH engine injects its bucket index here).
    """

    def __init__(self, k: int, edge_oracle: EdgeOracle | None = None, seed: int = 0,
                 search_factory=None):
        if k < 1:
            raise ValueError("k must be at least 1")
        self.k = k
        self.edge_oracle = edge_oracle
        self._rng = random.Random(seed)
        self.rank: dict = {}
        self._rank_values: set[int] = set()
        self._alg: list[tuple[int, object]] = []  # sorted (rank, vertex)
        self._heap: list[tuple[int, object]] = []
        self._queued: set = set()
        self.leader: dict = {}
        self.followers: dict = {}
        # instrumentation
        self.queue_insertions = 0
        self.leader_changes = 0
        self.eliminator_changes = 0  # filled by auditing harnesses
        self.edge_queries = 0
        self.search = search_factory(self) if search_factory else _ScanSearch(self)

    # -- basic views ----------------------------------------------------

    def __contains__(self, v) -> bool:
        return v in self.rank

    def __len__(self) -> int:
        return len(self.rank)

    def alg_vertices(self) -> list:
        """Current alg set in rank order."""
        return [v for _, v in self._alg]

    def alg_size(self) -> int:
        return len(self._alg)

    @property
    def solution_valid(self) -> bool:
        """True when alg is the full maximal independent set (|alg| <= k)."""
        return len(self._alg) <= self.k

    def followers_of(self, v) -> frozenset:
        return frozenset(self.followers.get(v, ()))

    def queue_vertices(self) -> set:
        return set(self._queued)

    @property
    def ops_total(self) -> int:
        """Elementary-operation count: queue traffic plus edge queries."""
        return self.queue_insertions + self.edge_queries

    # -- internals ------------------------------------------------------

    def _edge(self, a, b) -> bool:
        self.edge_queries += 1
        return self.edge_oracle(a, b)

    def _draw_rank(self) -> int:
        while True:
            r = self._rng.getrandbits(RANK_BITS)
            if r not in self._rank_values:
                return r

    def _alg_add(self, v) -> None:
        insort(self._alg, (self.rank[v], v))
        self.search.on_add(v)

    def _alg_remove(self, v) -> None:
        pos = bisect_left(self._alg, (self.rank[v], v))
        del self._alg[pos]
        self.search.on_remove(v)

    def _enqueue(self, v) -> None:
        heapq.heappush(self._heap, (self.rank[v], v))
        self._queued.add(v)
        self.queue_insertions += 1

    def _queue_peek(self):
        while self._heap:
            rk, v = self._heap[0]
            if v in self._queued and self.rank.get(v) == rk:
                return rk, v
            heapq.heappop(self._heap)
        return None

    def _set_leader(self, v, u) -> None:
        if self.leader.get(v) != u:
            self.leader_changes += 1
        self.leader[v] = u

    def _spill_followers(self, v) -> None:
        for w in sorted(self.followers[v], key=lambda x: self.rank[x]):
            self._enqueue(w)
            self._set_leader(w, None)
        del self.followers[v]

    # -- the three routines ----------------------------------------------

    def insert_vertex(self, v, rk: int) -> None:
        """Attempt to place v (rank rk) into alg, the queue, or a follower list."""
        if len(self._alg) == self.k + 1 and rk > self._alg[-1][0]:
            self._enqueue(v)
            return
        u_star, neighbors = self.search.find(v, rk)
        if u_star is None:
            self._alg_add(v)
            if len(self._alg) == self.k + 2:
                _, u = self._alg[-1]
                self._alg_remove(u)
                self._enqueue(u)
        elif self.rank[u_star] < rk:
            if v in self.followers:  # an inactive leader re-inserted from the queue
                self._spill_followers(v)
            self.followers.setdefault(u_star, set()).add(v)
            self._set_leader(v, u_star)
        else:
            for u in neighbors:
                if u in self.followers:
                    self._spill_followers(u)
            flock = self.followers.setdefault(v, set())
            for u in neighbors:
                self._set_leader(u, v)
                flock.add(u)
                self._alg_remove(u)
            self._alg_add(v)

    def delete_vertex(self, v) -> None:
        """Remove an active vertex; queue draining is the caller's job."""
        if v not in self.rank:
            raise UnknownPoint(f"vertex {v!r} is not active in this instance")
        led = self.leader.get(v)
        if led is not None:  # follower
            self.followers[led].discard(v)
        elif v in self._queued:
            if v in self.followers:  # inactive leader
                self._spill_followers(v)
            self._queued.discard(v)
        else:  # active leader in alg
            if v in self.followers:
                self._spill_followers(v)
            self._alg_remove(v)
        self._rank_values.discard(self.rank[v])
        del self.rank[v]
        self.leader.pop(v, None)

    def process_update(self, op: UpdateOp, rank: int | None = None) -> "LfmisInstance":
        """Apply one stream update, then drain the unclustered queue."""
        if op.kind == INSERT:
            if op.id in self.rank:
                raise DuplicateInsert(f"vertex {op.id!r} already active")
            rk = self._draw_rank() if rank is None else rank
            if rank is not None and rk in self._rank_values:
                raise ValueError(f"injected rank {rk} collides")
            self.rank[op.id] = rk
            self._rank_values.add(rk)
            self.leader[op.id] = None
            self.insert_vertex(op.id, rk)
        else:
            if op.id not in self.rank:
                raise DeleteOfInactive(f"vertex {op.id!r} is not active")
            self.delete_vertex(op.id)
        while True:
            top = self._queue_peek()
            if top is None:
                break
            rk, u = top
            if len(self._alg) <= self.k or rk < self._alg[-1][0]:
                self._queued.discard(u)
                heapq.heappop(self._heap)
                self.insert_vertex(u, rk)
            else:
                break
        return self

    # -- replay ----------------------------------------------------------

    def rebuild(self, vertices: Iterable, seed: int | None = None) -> None:
        """Reset with fresh ranks and re-insert the given vertices."""
        if seed is not None:
            self._rng = random.Random(seed)
        self.rank.clear()
        self._rank_values.clear()
        self._alg.clear()
        self._heap.clear()
        self._queued.clear()
        self.leader.clear()
        self.followers.clear()
        for v in sorted(vertices, key=str):
            self.process_update(UpdateOp(INSERT, v))


def eliminator_oracle(adjacency: dict, ranks: dict, v):
    """Eliminator of v from a full greedy LFMIS recomputation.

    Test-support instrumentation: walks the minimum-rank-first kill process
    over an explicit adjacency snapshot and returns the MIS vertex that
    killed v (v itself when v joins the MIS).
    """
    if v not in adjacency:
        raise UnknownPoint(f"vertex {v!r} not in snapshot")
    eliminator: dict = {}
    for u in sorted(adjacency, key=lambda x: ranks[x]):
        if u in eliminator:
            continue
        eliminator[u] = u
        for w in adjacency[u]:
            if w not in eliminator:
                eliminator[w] = u
    return eliminator[v]
