"""Executable lower-bound constructions: metric-adaptive adversary and
planted-cluster hard instances.

The adversary answers distance queries from the shortest-path metric of a
unit-length graph it grows as it answers: open vertices are virtually
pairwise-adjacent, an answered path donates at most one new real edge, and
vertices whose degree crosses 100f close and are deleted soon after. At
clean operations (no closed vertices) several explicit metrics consistent
with every answer ever given can be materialized and used to stress-test an
algorithm's reported solution.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

from .errors import BudgetExceeded, NotCleanOperation, UnknownPoint
from .metric import DELETE, INSERT, MatrixOracle, UpdateOp

OPEN = "open"
CLOSED = "closed"
OFF = "off"

INF = float("inf")


class AdversaryState:
    """Query-answering adversary over a growing unit-edge graph.

    ``f`` is the per-operation query budget, a callable (k, n) -> value
    non-decreasing in n, or a constant. Degree thresholds follow the
    cumulative rule: a vertex closes the first time its degree reaches
    100*f(k, t) at operation t and never reopens; the repair step keeps an
    open vertex in every component, so no degree exceeds the closing
    threshold by more than one.
    """

    def __init__(self, k: int, f: Callable[[int, int], float] | float):
        self.k = k
        self.f = f if callable(f) else (lambda _k, _n, _v=float(f): _v)
        self.graph: dict[int, set[int]] = {}
        self.label: dict[int, str] = {}
        self.t = 0
        self._next_id = 0
        self.answers: list[tuple[int, int, int]] = []
        self.repair_edges = 0
        self._counts = {OPEN: 0, CLOSED: 0, OFF: 0}
        self._closed_pool: set[int] = set()

    # -- views ---------------------------------------------------------------

    def threshold(self) -> float:
        return 100.0 * self.f(self.k, max(1, self.t))

    def counts(self) -> dict:
        return dict(self._counts)

    @property
    def n_active(self) -> int:
        return self._counts[OPEN] + self._counts[CLOSED]

    @property
    def open_count(self) -> int:
        return self._counts[OPEN]

    @property
    def is_clean(self) -> bool:
        return self._counts[CLOSED] == 0

    def open_vertices(self) -> list[int]:
        return sorted(v for v, lab in self.label.items() if lab == OPEN)

    def degree(self, v: int) -> int:
        return len(self.graph[v])

    def _relabel(self, v: int, lab: str) -> None:
        self._counts[self.label[v]] -= 1
        self.label[v] = lab
        self._counts[lab] += 1
        if lab == CLOSED:
            self._closed_pool.add(v)
        else:
            self._closed_pool.discard(v)

    # -- stream generation ------------------------------------------------------

    def generate_update(self) -> UpdateOp:
        """Delete the lowest-id closed vertex if any exists, else insert fresh."""
        self.t += 1
        if self._closed_pool:
            v = min(self._closed_pool)
            self._relabel(v, OFF)
            return UpdateOp(DELETE, v)
        v = self._next_id
        self._next_id += 1
        self.graph[v] = set()
        self.label[v] = OPEN
        self._counts[OPEN] += 1
        return UpdateOp(INSERT, v)

    # -- query answering -----------------------------------------------------------

    def _bfs_open(self, src: int) -> tuple[float, int | None]:
        """Distance to (and id of) the nearest open vertex, ties by id."""
        if self.label[src] == OPEN:
            return 0, src
        seen = {src}
        frontier = [src]
        depth = 0
        while frontier:
            depth += 1
            nxt = []
            for u in frontier:
                for w in self.graph[u]:
                    if w not in seen:
                        seen.add(w)
                        nxt.append(w)
            opens = [w for w in nxt if self.label[w] == OPEN]
            if opens:
                return depth, min(opens)
            frontier = nxt
        return INF, None

    def _bfs_limited(self, src: int, dst: int, limit: float) -> float:
        """Pure graph distance src -> dst if at most `limit`, else inf."""
        if src == dst:
            return 0
        dist = {src: 0}
        q = deque([src])
        while q:
            u = q.popleft()
            du = dist[u]
            if du >= limit:
                continue
            for w in self.graph[u]:
                if w not in dist:
                    if w == dst:
                        return du + 1
                    dist[w] = du + 1
                    q.append(w)
        return INF

    def _maybe_close(self, v: int) -> None:
        if self.label[v] == OPEN and self.degree(v) >= self.threshold():
            self._relabel(v, CLOSED)

    def _repair_component(self, seed_vertex: int) -> None:
        """Keep at least one open vertex in seed_vertex's component."""
        comp = {seed_vertex}
        q = deque([seed_vertex])
        while q:
            u = q.popleft()
            if self.label[u] == OPEN:
                return
            for w in self.graph[u]:
                if w not in comp:
                    comp.add(w)
                    q.append(w)
        donor = min(comp, key=lambda x: (len(self.graph[x]), x))
        opens = self.open_vertices()
        if not opens:
            return
        target = min(opens, key=lambda x: (len(self.graph[x]), x))
        self.graph[donor].add(target)
        self.graph[target].add(donor)
        self.repair_edges += 1
        self._maybe_close(target)

    def answer_query(self, a: int, b: int) -> int:
        """Consistent distance answer; may record one new open-open edge."""
        if a not in self.graph or b not in self.graph:
            raise UnknownPoint(f"query on unknown point ({a!r}, {b!r})")
        if a == b:
            return 0
        da, ua = self._bfs_open(a)
        db, ub = self._bfs_open(b)
        via = da + 1 + db if ua is not None and ub is not None else INF
        pure = self._bfs_limited(a, b, via)
        if pure <= via:
            ans = pure
        else:
            ans = via
            if ua != ub and ub not in self.graph[ua]:
                self.graph[ua].add(ub)
                self.graph[ub].add(ua)
                self._maybe_close(ua)
                self._maybe_close(ub)
                self._repair_component(ua)
        if ans == INF:
            raise AssertionError("adversary graph lost its open-vertex invariant")
        ans = int(ans)
        self.answers.append((a, b, ans))
        return ans

    # -- consistent metrics -----------------------------------------------------------

    def materialize_metric(self, kind: str, p_star: int | None = None,
                           l1: int | None = None, l2: int | None = None,
                           p_set: list | None = None, ell: int | None = None,
                           ) -> "ConsistentMetric":
        """Build a consistent metric at a clean operation and verify all answers.

        The metric views the live graph; it is meant to be used before the
        next update (the gauntlet materializes one per clean operation).
        """
        if not self.is_clean:
            raise NotCleanOperation("closed vertices present; metric undefined")
        metric = ConsistentMetric.build(self, kind, p_star=p_star, l1=l1, l2=l2,
                                        p_set=p_set, ell=ell)
        metric.report = metric.verify_answers(self.answers)
        return metric


@dataclass
class ConsistentMetric:
    """Explicit metric consistent with every answer the adversary gave.

    Kinds: ``M_uni`` (all open pairs at distance 1), ``M_star`` (open pairs
    at max(|layer difference|, 1) over BFS layers around p*, with vertices
    outside p*'s component grouped at layer n), ``M_range`` (M_star with
    layers clamped to [l1, l2]), ``M_multi`` (unit edges between open
    vertices at BFS distance >= ell from a center set).
    """

    kind: str
    graph: dict
    label: dict
    layers: dict | None = None
    l1: int | None = None
    l2: int | None = None
    qualifying: set | None = None
    unreachable_layer: int = 0
    report: list = field(default_factory=list)

    @classmethod
    def build(cls, state: AdversaryState, kind: str, p_star=None, l1=None, l2=None,
              p_set=None, ell=None) -> "ConsistentMetric":
        graph = state.graph
        label = state.label
        layers = None
        qualifying = None
        unreachable = max(1, state.n_active)
        if kind in ("M_star", "M_range"):
            if p_star is None:
                opens = state.open_vertices()
                if not opens:
                    raise NotCleanOperation("no open vertex to anchor M_star")
                p_star = opens[0]
            dist = _multi_bfs(graph, [p_star])
            layers = {
                v: dist.get(v, unreachable)
                for v, lab in label.items() if lab == OPEN
            }
            if kind == "M_range" and (l1 is None or l2 is None or not l1 < l2):
                raise ValueError("M_range needs thresholds l1 < l2")
        elif kind == "M_multi":
            if p_set is None or ell is None:
                raise ValueError("M_multi needs a center set and a threshold")
            dist = _multi_bfs(graph, list(p_set))
            qualifying = {
                v for v, lab in label.items()
                if lab == OPEN and dist.get(v, INF) >= ell
            }
        elif kind != "M_uni":
            raise ValueError(f"unknown consistent-metric kind {kind!r}")
        return cls(kind=kind, graph=graph, label=label, layers=layers,
                   l1=l1, l2=l2, qualifying=qualifying,
                   unreachable_layer=unreachable)

    # -- distances -------------------------------------------------------------

    def _clamp(self, layer: int) -> int:
        if self.kind == "M_range":
            return min(max(layer, self.l1), self.l2)
        return layer

    def _aug(self, u: int, v: int) -> float:
        """Distance between two open vertices through the metric's extra edges."""
        if self.kind == "M_uni":
            return 1
        if self.kind in ("M_star", "M_range"):
            return max(abs(self._clamp(self.layers[u]) - self._clamp(self.layers[v])), 1)
        if u in self.qualifying and v in self.qualifying:
            return 1
        return INF

    def open_distance(self, a: int, b: int) -> float:
        """Closed-form distance between open vertices.

        Graph routes cannot undercut the layer formula: every graph edge
        changes the BFS layer by at most one, so the formula value is the
        true shortest-path distance in the augmented graph.
        """
        if a == b:
            return 0
        aug = self._aug(a, b)
        return aug if aug < INF else self._pair_distance(a, b, INF)

    def _pair_distance(self, a: int, b: int, limit: float) -> float:
        """Shortest augmented-graph distance, exact for values up to `limit`."""
        if a == b:
            return 0
        best = _bfs_pair(self.graph, a, b, limit)
        da = _bfs_open_profile(self.graph, self.label, a, limit)
        db = _bfs_open_profile(self.graph, self.label, b, limit)
        for u, du in da.items():
            for v, dv in db.items():
                aug = self._aug(u, v) if u != v else 0
                cand = du + aug + dv
                if cand < best:
                    best = cand
        return best

    def distance(self, a: int, b: int, limit: float = INF) -> float:
        if (self.kind != "M_multi"
                and self.label.get(a) == OPEN and self.label.get(b) == OPEN):
            return self.open_distance(a, b)
        return self._pair_distance(a, b, limit)

    def verify_answers(self, answers: list) -> list:
        """Recorded answers that disagree with this metric (empty = consistent)."""
        bad = []
        label = self.label
        graph = self.graph
        for a, b, val in answers:
            if val == 1 and b in graph[a]:
                continue  # recorded unit edge; no metric here shortens below 1
            if (self.kind != "M_multi"
                    and label.get(a) == OPEN and label.get(b) == OPEN):
                d = self.open_distance(a, b)
            else:
                d = self._pair_distance(a, b, val + 2)
            if d != val:
                bad.append((a, b, val, d))
        return bad

    def max_open_distance(self) -> float:
        """Largest pairwise distance among open vertices (the consistency gap)."""
        if self.kind == "M_uni":
            return 1.0
        if self.kind in ("M_star", "M_range"):
            vals = [self._clamp(l) for l in self.layers.values()]
            if len(vals) < 2:
                return 0.0
            return float(max(max(vals) - min(vals), 1))
        raise ValueError("gap is defined for M_uni/M_star/M_range")

    def kcenter_cost(self, centers: list) -> float:
        """Max distance of any open vertex to its nearest center."""
        worst = 0.0
        for p, lab in self.label.items():
            if lab != OPEN:
                continue
            d = min(self.open_distance(p, c) for c in centers)
            worst = max(worst, d)
        return worst


def _multi_bfs(graph: dict, sources: list) -> dict:
    dist = {s: 0 for s in sources}
    q = deque(sources)
    while q:
        u = q.popleft()
        for w in graph[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                q.append(w)
    return dist


def _bfs_pair(graph: dict, a: int, b: int, limit: float) -> float:
    if a == b:
        return 0
    dist = {a: 0}
    q = deque([a])
    while q:
        u = q.popleft()
        if dist[u] >= limit:
            continue
        for w in graph[u]:
            if w not in dist:
                if w == b:
                    return dist[u] + 1
                dist[w] = dist[u] + 1
                q.append(w)
    return INF


def _bfs_open_profile(graph: dict, label: dict, src: int, limit: float) -> dict:
    """Open vertices within `limit` of src, with their graph distances."""
    out = {}
    if label.get(src) == OPEN:
        out[src] = 0
    dist = {src: 0}
    q = deque([src])
    while q:
        u = q.popleft()
        if dist[u] >= limit:
            continue
        for w in graph[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                if label.get(w) == OPEN:
                    out[w] = dist[w]
                q.append(w)
    return out


# ---------------------------------------------------------------------------
# Gauntlet driver
# ---------------------------------------------------------------------------

class DiameterReporter:
    """Toy algorithm under test: samples a few pairs per update and reports
    the largest answered distance as its diameter estimate."""

    name = "diameter-reporter"

    def __init__(self, queries_per_op: int = 4, seed: int = 0):
        self.queries_per_op = queries_per_op
        self.rng = random.Random(seed)
        self.active: list[int] = []
        self.best = 0

    def process(self, op: UpdateOp, query) -> None:
        if op.kind == INSERT:
            self.active.append(op.id)
        else:
            self.active.remove(op.id)
        if len(self.active) < 2:
            return
        for _ in range(self.queries_per_op):
            a, b = self.rng.sample(self.active, 2)
            self.best = max(self.best, query(a, b))

    def solution(self) -> dict:
        return {"diameter": max(self.best, 1 if len(self.active) > 1 else 0)}


def run_gauntlet(algorithm, k: int, f, ops: int, evaluate_solution: bool = True,
                 verify_every: int = 1) -> dict:
    """Drive an algorithm through the adversary under a hard query budget.

    The algorithm object must expose ``process(op, query)`` and
    ``solution()``. Queries beyond the cumulative budget sum_i f(k, n_i)
    hard-fail the run with BudgetExceeded. ``verify_every`` thins the
    consistency verification to every j-th clean operation (1 = all, per the
    acceptance run).
    """
    state = AdversaryState(k, f)
    spent = 0
    allowance = 0.0
    records = []
    clean_records = []
    clean_seen = 0

    def query(a, b):
        nonlocal spent
        if spent + 1 > allowance:
            raise BudgetExceeded(
                f"query budget exhausted at operation {state.t}: "
                f"{spent} spent, allowance {allowance:.1f}"
            )
        spent += 1
        return state.answer_query(a, b)

    for _ in range(ops):
        allowance += state.f(k, max(1, state.n_active))
        op = state.generate_update()
        algorithm.process(op, query)
        rec = {
            "t": state.t,
            "n_active": state.n_active,
            "open": state._counts[OPEN],
            "closed": state._counts[CLOSED],
            "off": state._counts[OFF],
            "open_fraction": state._counts[OPEN] / state.t,
            "clean": state.is_clean,
            "queries_spent": spent,
        }
        records.append(rec)
        if state.is_clean:
            clean_seen += 1
            if (clean_seen - 1) % verify_every:
                continue
            uni = state.materialize_metric("M_uni")
            star = state.materialize_metric("M_star")
            crec = {
                "t": state.t,
                "n_active": state.n_active,
                "answers": len(state.answers),
                "uni_mismatches": len(uni.report),
                "star_mismatches": len(star.report),
                "gap": star.max_open_distance(),
            }
            if evaluate_solution:
                sol = algorithm.solution()
                if isinstance(sol, dict) and "diameter" in sol:
                    crec["reported_diameter"] = sol["diameter"]
                    crec["ratio"] = crec["gap"] / max(sol["diameter"], 1)
                elif sol:
                    crec.update(_evaluate_centers(list(sol), uni, star))
            clean_records.append(crec)
    return {
        "records": records,
        "clean_records": clean_records,
        "final_t": state.t,
        "queries_spent": spent,
        "state": state,
    }


def _evaluate_centers(centers: list, uni: ConsistentMetric,
                      star: ConsistentMetric) -> dict:
    """Cost of a center set under M_uni and the worst M_range over BFS layers."""
    cost_uni = uni.kcenter_cost(centers)
    worst = cost_uni
    layer_values = sorted(set(star.layers.values()))
    for i, l1 in enumerate(layer_values):
        for l2 in layer_values[i + 1:]:
            rng_metric = ConsistentMetric(
                kind="M_range", graph=star.graph, label=star.label,
                layers=star.layers, l1=l1, l2=l2,
                unreachable_layer=star.unreachable_layer,
            )
            worst = max(worst, rng_metric.kcenter_cost(centers))
    return {
        "cost_uni": cost_uni,
        "cost_range_worst": worst,
        "ratio": worst / max(cost_uni, 1.0),
    }


# ---------------------------------------------------------------------------
# Planted hard instances
# ---------------------------------------------------------------------------

@dataclass
class PlantedInstance:
    """Planted-cluster distance matrix: within 1, across R, planted row 2R."""

    n: int
    k: int
    R: float
    h: tuple
    coin: int
    planted_index: int
    matrix: list

    def oracle(self) -> MatrixOracle:
        return MatrixOracle(self.matrix)

    def bucket_sizes(self) -> list[int]:
        sizes = [0] * self.k
        for b in self.h:
            sizes[b] += 1
        return sizes

    def all_buckets_paired(self) -> bool:
        return all(s >= 2 for s in self.bucket_sizes())

    def opt_bound(self) -> tuple[str, float]:
        """Certified bound on the optimal k-center cost."""
        if self.coin == 0:
            return ("upper", 1.0)
        if self.all_buckets_paired():
            return ("lower", self.R)
        return ("none", 0.0)


def generate_planted(n: int, k: int, R: float, seed: int = 0) -> PlantedInstance:
    if n < 2 * k:
        raise ValueError("planted instance needs n >= 2k")
    if R <= 1:
        raise ValueError("separation R must exceed 1")
    rng = random.Random(seed)
    h = tuple(rng.randrange(k) for _ in range(n))
    coin = rng.randint(0, 1)
    idx = rng.randrange(n)
    matrix = [[0.0] * n for _ in range(n)]
    for p in range(n):
        for q in range(p + 1, n):
            d = 1.0 if h[p] == h[q] else float(R)
            if coin == 1 and d == 1.0 and (p == idx or q == idx):
                d = 2.0 * R
            matrix[p][q] = matrix[q][p] = d
    return PlantedInstance(n=n, k=k, R=float(R), h=h, coin=coin,
                           planted_index=idx, matrix=matrix)
