"""Locality-sensitive hash families, bucket-tree index, and LSH k-center.

The index stores the maintained MIS (one copy per threshold scale) in s hash
tables whose buckets are kept in rank order, so the minimum-rank neighbor of
a query point can be read off after filtering spurious collisions with one
exact distance check per scanned candidate. Edges are those of the random
collision graph intersected with the cr-threshold graph, which sandwiches
the true threshold graph: G_r ⊆ G ⊆ G_cr whenever every near pair collides
somewhere.
"""

from __future__ import annotations

import math
from bisect import bisect_left, insort
from dataclasses import dataclass

import numpy as np

from .errors import (
    DuplicateInsert,
    Infeasible,
    RadiusOutOfRange,
    UnknownPoint,
    UnsupportedKind,
)
from .lfmis import LfmisInstance
from .kcenter import KCenterSolution
from .metric import (
    INSERT,
    DistanceOracle,
    PointId,
    ScaleLadder,
    StreamStats,
    UpdateOp,
    derive_seed,
)

_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_EMPTY_SENTINEL = np.uint64(0xFFFFFFFFFFFFFFFF)


def _mix(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer over uint64 arrays (wrapping arithmetic)."""
    x = x.astype(np.uint64, copy=True)
    x ^= x >> np.uint64(30)
    x *= _MIX1
    x ^= x >> np.uint64(27)
    x *= _MIX2
    x ^= x >> np.uint64(31)
    return x


class LshFamily:
    """Base family: (r, cr, p1, p2)-sensitive hash functions for one scale."""

    kind = "abstract"

    def __init__(self, r: float, c: float, p1: float, p2: float):
        if c < 1:
            raise RadiusOutOfRange("approximation factor c must be >= 1")
        if not (0 <= p2 < p1 <= 1):
            raise RadiusOutOfRange(
                f"family needs 0 <= p2 < p1 <= 1, got p1={p1:.4f}, p2={p2:.4f}"
            )
        self.r = r
        self.c = c
        self.p1 = p1
        self.p2 = p2

    @property
    def rho(self) -> float:
        if self.p2 <= 0.0:
            return 0.0
        return math.log(1.0 / self.p1) / math.log(1.0 / self.p2)

    def draw(self, seed: int, t: int, s: int) -> "Hasher":
        raise NotImplementedError


class Hasher:
    """One draw of s concatenated t-fold hash functions; maps payload -> s keys."""

    def keys(self, payload) -> list[int]:
        raise NotImplementedError


class _TableCombiner:
    """Combines t integer hash slots per table into a single bucket key."""

    def __init__(self, rng: np.random.Generator, s: int, t: int):
        self.mult = rng.integers(1, 2**63, size=(s, t), dtype=np.uint64) | np.uint64(1)

    def combine(self, slots: np.ndarray) -> list[int]:
        mixed = _mix(slots.astype(np.uint64) * self.mult)
        return [int(x) for x in mixed.sum(axis=1, dtype=np.uint64)]


class BitSampleFamily(LshFamily):
    """Hamming metric: hash by sampling one coordinate."""

    kind = "bitsample-hamming"

    def __init__(self, r: float, c: float, dim: int):
        if dim < 1:
            raise RadiusOutOfRange("hamming dimension must be positive")
        if r <= 0 or r >= dim:
            raise RadiusOutOfRange(f"bit sampling needs 0 < r < dim, got r={r}, dim={dim}")
        p1 = 1.0 - r / dim
        p2 = max(0.0, 1.0 - c * r / dim)
        super().__init__(r, c, p1, p2)
        self.dim = dim

    def draw(self, seed, t, s):
        rng = np.random.default_rng(seed)
        idx = rng.integers(0, self.dim, size=(s, t))
        comb = _TableCombiner(rng, s, t)

        class H(Hasher):
            def keys(self, payload):
                arr = np.asarray(payload, dtype=np.uint64)
                return comb.combine(arr[idx])

        return H()


class MinHashFamily(LshFamily):
    """Jaccard metric: minimum of a seeded hash over set elements."""

    kind = "minhash-jaccard"

    def __init__(self, r: float, c: float):
        if not (0 < r <= 1.0 / (2.0 * c)):
            raise RadiusOutOfRange(
                f"MinHash scale must satisfy 0 < r <= 1/(2c); got r={r}, c={c}"
            )
        super().__init__(r, c, p1=1.0 - r, p2=1.0 - c * r)

    def draw(self, seed, t, s):
        rng = np.random.default_rng(seed)
        slot_seeds = rng.integers(0, 2**63, size=(s, t), dtype=np.uint64)
        comb = _TableCombiner(rng, s, t)

        class H(Hasher):
            def keys(self, payload):
                if not payload:
                    slots = np.full(slot_seeds.shape, _EMPTY_SENTINEL)
                else:
                    el = np.fromiter((int(e) & (2**63 - 1) for e in payload),
                                     dtype=np.uint64, count=len(payload))
                    mixed = _mix(el[None, None, :] ^ slot_seeds[:, :, None])
                    slots = mixed.min(axis=2)
                return comb.combine(slots)

        return H()


def _l2_collision(s: float) -> float:
    # collision probability of the floor((a.x+b)/w) family at w/u = s, a ~ N(0,1)
    from scipy.stats import norm

    return 1.0 - 2.0 * norm.cdf(-s) - (2.0 / (math.sqrt(2.0 * math.pi) * s)) * (
        1.0 - math.exp(-(s * s) / 2.0)
    )


def _l1_collision(s: float) -> float:
    # same, with a ~ Cauchy(0,1)
    return (2.0 / math.pi) * math.atan(s) - math.log(1.0 + s * s) / (math.pi * s)


class PStableFamily(LshFamily):
    """l2/l1 metrics: floor((a.x + b)/w) with a p-stable projection vector.

    The bucket width w is not pinned by the construction, so it is chosen
    from a small grid to minimize rho, with (p1, p2) evaluated from the
    family's collision integral.
    """

    W_GRID = (0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0)

    def __init__(self, kind: str, r: float, c: float, dim: int, w: float | None = None):
        if kind not in ("pstable-l2", "pstable-l1"):
            raise UnsupportedKind(kind)
        if r <= 0:
            raise RadiusOutOfRange("scale must be positive")
        self.kind = kind
        collide = _l2_collision if kind == "pstable-l2" else _l1_collision
        if w is None:
            best = None
            for mult in self.W_GRID:
                cand = mult * r
                p1 = collide(cand / r)
                p2 = collide(cand / (c * r))
                if not (0 < p2 < p1 < 1):
                    continue
                rho = math.log(1 / p1) / math.log(1 / p2)
                if best is None or rho < best[0]:
                    best = (rho, cand, p1, p2)
            if best is None:
                raise RadiusOutOfRange("no usable bucket width for these parameters")
            _, w, p1, p2 = best
        else:
            p1 = collide(w / r)
            p2 = collide(w / (c * r))
        super().__init__(r, c, p1, p2)
        self.w = w
        self.dim = dim

    def draw(self, seed, t, s):
        rng = np.random.default_rng(seed)
        if self.kind == "pstable-l2":
            A = rng.normal(0.0, 1.0, size=(s, t, self.dim))
        else:
            A = rng.standard_cauchy(size=(s, t, self.dim))
        B = rng.uniform(0.0, self.w, size=(s, t))
        w = self.w
        comb = _TableCombiner(rng, s, t)

        class H(Hasher):
            def keys(self, payload):
                x = np.asarray(payload, dtype=float)
                proj = np.floor((A @ x + B) / w).astype(np.int64)
                return comb.combine(proj.view(np.uint64))

        return H()


def sample_family(kind: str, r: float, c: float, *, dim: int | None = None,
                  w: float | None = None) -> LshFamily:
    """Construct a hash family of the given kind at scale r, factor c."""
    if kind == "bitsample-hamming":
        if dim is None:
            raise UnsupportedKind("bitsample-hamming needs dim")
        return BitSampleFamily(r, c, dim)
    if kind == "minhash-jaccard":
        return MinHashFamily(r, c)
    if kind in ("pstable-l2", "pstable-l1"):
        if dim is None:
            raise UnsupportedKind(f"{kind} needs dim")
        return PStableFamily(kind, r, c, dim, w=w)
    raise UnsupportedKind(f"unknown family kind {kind!r}")


FAMILY_FOR_METRIC = {
    "hamming": "bitsample-hamming",
    "jaccard": "minhash-jaccard",
    "euclidean-l2": "pstable-l2",
    "lp": "pstable-l1",
}


@dataclass(frozen=True)
class LshParams:
    """Table count and concatenation length for one scale at one epoch."""

    t: int
    s: int
    delta: float
    n: int

    @classmethod
    def compute(cls, family: LshFamily, n: int, delta: float) -> "LshParams":
        n = max(2, int(n))
        if family.p2 <= 0.0:
            t = 1
        else:
            t = max(1, math.ceil(2.0 * math.log(n) / math.log(1.0 / family.p2)))
        rho = family.rho
        s = max(1, math.ceil(math.log(n * n / delta) * n ** (2.0 * rho) / family.p1))
        return cls(t=t, s=s, delta=delta, n=n)


class LshIndex:
    """s hash tables of rank-ordered buckets over the currently indexed set."""

    def __init__(self, hasher: Hasher, s: int):
        self.hasher = hasher
        self.s = s
        self.tables: list[dict] = [dict() for _ in range(s)]
        self.members: dict = {}  # vertex -> rank
        self._key_cache: dict = {}
        self.scanned = 0
        self.spurious = 0

    def keys_for(self, v, payload) -> list[int]:
        keys = self._key_cache.get(v)
        if keys is None:
            keys = self.hasher.keys(payload)
            self._key_cache[v] = keys
        return keys

    def insert(self, v, rank: int, payload) -> None:
        if v in self.members:
            raise DuplicateInsert(f"vertex {v!r} already indexed")
        for table, key in zip(self.tables, self.keys_for(v, payload)):
            insort(table.setdefault(key, []), (rank, v))
        self.members[v] = rank

    def delete(self, v) -> None:
        rank = self.members.pop(v, None)
        if rank is None:
            raise UnknownPoint(f"vertex {v!r} not indexed")
        for table, key in zip(self.tables, self._key_cache[v]):
            bucket = table[key]
            pos = bisect_left(bucket, (rank, v))
            del bucket[pos]
            if not bucket:
                del table[key]

    def query_top(self, v, payload, is_neighbor):
        """Minimum-rank indexed vertex colliding with v that passes the filter."""
        best = None
        for table, key in zip(self.tables, self.keys_for(v, payload)):
            for rank, u in table.get(key, ()):
                if best is not None and rank >= best[0]:
                    break
                if u == v:
                    continue
                self.scanned += 1
                if is_neighbor(u):
                    best = (rank, u)
                    break
                self.spurious += 1
        return best

    def query_all(self, v, payload, is_neighbor) -> list:
        """All indexed collision neighbors of v passing the filter, rank-ordered."""
        seen: dict = {}
        for table, key in zip(self.tables, self.keys_for(v, payload)):
            for rank, u in table.get(key, ()):
                if u == v or u in seen:
                    continue
                self.scanned += 1
                ok = is_neighbor(u)
                seen[u] = (rank, ok)
                if not ok:
                    self.spurious += 1
        return [u for _, u in sorted((rank, u) for u, (rank, ok) in seen.items() if ok)]

    def population(self) -> int:
        return sum(len(b) for table in self.tables for b in table.values())

    def bucket_sizes(self, i: int) -> list[int]:
        return [len(b) for b in self.tables[i].values()]


class _LshSearch:
    """Neighbor-search strategy plugging an LshIndex into an LfmisInstance."""

    def __init__(self, inst: LfmisInstance, index: LshIndex, oracle: DistanceOracle,
                 cr: float, payload_fn):
        self.inst = inst
        self.index = index
        self.oracle = oracle
        self.cr = cr
        self.payload_fn = payload_fn

    def _filter(self, v):
        oracle, cr = self.oracle, self.cr
        return lambda u: oracle.distance(v, u) <= cr

    def on_add(self, v) -> None:
        self.index.insert(v, self.inst.rank[v], self.payload_fn(v))

    def on_remove(self, v) -> None:
        self.index.delete(v)

    def find(self, v, rk: int):
        payload = self.payload_fn(v)
        top = self.index.query_top(v, payload, self._filter(v))
        if top is None:
            return None, None
        rank_u, u = top
        if rank_u < rk:
            return u, None
        return u, self.index.query_all(v, payload, self._filter(v))


class _LshScale:
    """One threshold scale: family (fixed) plus per-epoch index and instance."""

    def __init__(self, r: float, family: LshFamily):
        self.r = r
        self.family = family
        self.params: LshParams | None = None
        self.index: LshIndex | None = None
        self.inst: LfmisInstance | None = None


class LshKCenterEngine:
    """c(2+eps)-approximate fully dynamic k-center over an LSH-able metric.

    Hash functions and table parameters are redrawn on epoch boundaries: when
    the active-set size outgrows the current bound, and at greedy checkpoints
    spaced half an active-set apart, the whole state is rebuilt by replaying
    the active points with fresh randomness.
    """

    def __init__(self, oracle: DistanceOracle, k: int, eps: float, c: float,
                 delta: float, r_min: float, r_max: float, seed: int = 0,
                 dim: int | None = None, family_kind: str | None = None):
        self.oracle = oracle
        self.k = k
        self.eps = eps
        self.c = c
        self.delta = delta
        self.seed = seed
        self.dim = dim
        kind = family_kind or FAMILY_FOR_METRIC.get(oracle.metric_kind)
        if kind is None:
            raise UnsupportedKind(
                f"no LSH family registered for metric {oracle.metric_kind!r}"
            )
        self.family_kind = kind
        ladder = ScaleLadder.build(eps, r_min, r_max)
        scales = list(ladder.scales)
        # scales beyond the family's valid range correspond to (nearly)
        # complete threshold graphs; they are dropped and replaced by a
        # single-center fallback at the metric's diameter bound
        cap = None
        self.diameter_bound: float | None = None
        if kind == "minhash-jaccard":
            cap = 1.0 / (2.0 * c)
            self.diameter_bound = 1.0
        elif kind == "bitsample-hamming":
            if dim is None:
                raise UnsupportedKind("bitsample-hamming needs dim")
            cap = float(dim) * (1.0 - 1e-9)
            self.diameter_bound = float(dim)
        self.capped = False
        if cap is not None:
            if scales[0] > cap:
                raise RadiusOutOfRange(
                    f"smallest scale {scales[0]} exceeds the family bound {cap}"
                )
            if scales[-1] > cap:
                scales = [r for r in scales if r <= cap]
                self.capped = True
        self.scales = [
            _LshScale(r, sample_family(kind, r, c, dim=dim)) for r in scales
        ]
        self.stats = StreamStats()
        self.epoch = 0
        self.n_hat = 2
        self.next_checkpoint: int | None = None
        self._winning: int | None = None
        self._fallback = False
        self._solution: KCenterSolution | None = None

    # -- epoch management --------------------------------------------------

    def _payload_fn(self):
        oracle = self.oracle
        return lambda v: oracle.payload_of(v)

    def _rebuild_epoch(self) -> None:
        self.epoch += 1
        # per-scale, per-epoch failure budget; the 1/(e(e+1)) series keeps the
        # union over an unbounded epoch schedule at delta exactly
        delta_scale = self.delta / (
            max(1, len(self.scales)) * self.epoch * (self.epoch + 1)
        )
        actives = sorted(self.stats.active, key=str)
        for i, sc in enumerate(self.scales):
            sc.params = LshParams.compute(sc.family, self.n_hat, delta_scale)
            hasher = sc.family.draw(
                derive_seed(self.seed, "epoch", self.epoch, "scale", i),
                sc.params.t, sc.params.s,
            )
            sc.index = LshIndex(hasher, sc.params.s)
            cr = self.c * sc.r
            payload_fn = self._payload_fn()

            def factory(inst, index=sc.index, cr=cr, payload_fn=payload_fn):
                return _LshSearch(inst, index, self.oracle, cr, payload_fn)

            sc.inst = LfmisInstance(
                self.k, edge_oracle=None,
                seed=derive_seed(self.seed, "epoch", self.epoch, "rank", i),
                search_factory=factory,
            )
            for v in actives:
                sc.inst.process_update(UpdateOp(INSERT, v))

    # -- updates -------------------------------------------------------------

    def update(self, op: UpdateOp) -> KCenterSolution:
        if op.kind == INSERT:
            self.oracle.add_point(op.id, op.coords)
        self.stats.apply_update(op)
        t, n = self.stats.t, self.stats.n_active
        restart = self.next_checkpoint is None or t == self.next_checkpoint
        while n > self.n_hat:
            self.n_hat *= 2
            restart = True
        if restart:
            self._rebuild_epoch()
            self.next_checkpoint = t + max(1, math.ceil(n / 2))
        else:
            for sc in self.scales:
                sc.inst.process_update(op)
        self._solution = self._select_solution()
        return self._solution

    def _select_solution(self) -> KCenterSolution:
        active = self.stats.active
        self._fallback = False
        if len(active) <= self.k:
            self._winning = None
            return KCenterSolution(
                cost_estimate=0.0,
                centers=tuple(sorted(active, key=str)),
                assignment={p: p for p in active},
            )
        for i, sc in enumerate(self.scales):
            if sc.inst.solution_valid:
                self._winning = i
                centers = tuple(sc.inst.alg_vertices())
                assignment = {
                    v: (sc.inst.leader[v] if sc.inst.leader.get(v) is not None else v)
                    for v in sc.inst.rank
                }
                return KCenterSolution(
                    cost_estimate=self.c * sc.r,
                    centers=centers,
                    assignment=assignment,
                    scale_index=i,
                    scale_r=sc.r,
                )
        if self.diameter_bound is not None:
            # every capped scale is oversubscribed, so the optimum exceeds
            # half the top capped scale; a single arbitrary center at the
            # metric's diameter bound preserves the c(2+eps) guarantee
            self._winning = None
            self._fallback = True
            center = min(active, key=str)
            return KCenterSolution(
                cost_estimate=self.diameter_bound,
                centers=(center,),
                assignment={p: center for p in active},
            )
        raise Infeasible("no LSH scale produced a MIS of size <= k")

    # -- queries ---------------------------------------------------------------

    def membership_query(self, p: PointId) -> PointId:
        if p not in self.stats.active:
            raise UnknownPoint(f"point {p!r} is not active")
        if self._winning is None:
            return self._solution.centers[0] if self._fallback else p
        inst = self.scales[self._winning].inst
        led = inst.leader.get(p)
        return p if led is None else led

    def enumerate_cluster(self, p: PointId) -> list:
        center = self.membership_query(p)
        if self._winning is None:
            if self._fallback:
                return sorted(self.stats.active, key=str)
            return [center]
        inst = self.scales[self._winning].inst
        return [center] + sorted(inst.followers_of(center), key=str)

    def realized_cost(self) -> float:
        if self._solution is None or not self._solution.assignment:
            return 0.0
        return max(
            self.oracle.raw_distance(p, c)
            for p, c in self._solution.assignment.items()
        )

    # -- debugging / verification -----------------------------------------------

    def debug_graph(self, scale_index: int) -> dict:
        """Materialize the scale's collision-and-filter graph over active points."""
        sc = self.scales[scale_index]
        pts = sorted(self.stats.active, key=str)
        adj = {p: set() for p in pts}
        cr = self.c * sc.r
        keys = {p: sc.index.keys_for(p, self.oracle.payload_of(p)) for p in pts}
        for i, a in enumerate(pts):
            for b in pts[i + 1:]:
                collide = any(ka == kb for ka, kb in zip(keys[a], keys[b]))
                if collide and self.oracle.raw_distance(a, b) <= cr:
                    adj[a].add(b)
                    adj[b].add(a)
        return adj
