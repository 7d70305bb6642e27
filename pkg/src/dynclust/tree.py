"""Deterministic fully dynamic k-center via clustering trees of blocking graphs.

One complete B-ary tree is kept per guessed optimum; leaves hold at most B*k
points, inner nodes hold exactly the centers of their children, and every
node records blocking edges between its centers and the points within the
guess radius. A node whose k centers leave some point unblocked certifies
that no solution of cost at most half the guess exists for its points.

There is no randomness anywhere in this module; iteration orders are pinned
(ascending point id, left-to-right leaves) so two runs on the same stream
are identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import CapacityExceeded, UnknownPoint
from .metric import INSERT, DistanceOracle, PointId, StreamStats, UpdateOp


def _key(p):
    """Ascending PointId: numeric ids numerically, everything else as text."""
    if isinstance(p, bool) or not isinstance(p, (int, float)):
        return (1, str(p))
    return (0, p)


class TreeNode:
    """One node of a clustering tree: points, flagged centers, blocking edges."""

    __slots__ = ("points", "centers", "edges", "witness", "children", "parent", "depth")

    def __init__(self, parent: "TreeNode | None" = None, depth: int = 0):
        self.points: dict = {}
        self.centers: set = set()
        self.edges: dict = {}
        self.witness = False
        self.children: list[TreeNode] = []
        self.parent = parent
        self.depth = depth

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def degree(self, p) -> int:
        return len(self.edges[p])

    def refresh_witness(self, k: int) -> None:
        self.witness = len(self.centers) == k and any(
            not self.edges[q] for q in self.points if q not in self.centers
        )

    def far_certificate(self) -> list:
        """Centers plus one unblocked non-center: pairwise-far points backing a witness."""
        out = sorted(self.centers, key=_key)
        for q in sorted(self.points, key=_key):
            if q not in self.centers and not self.edges[q]:
                out.append(q)
                break
        return out


def try_make_center(node: TreeNode, p, opt_prime: float, dist, k: int) -> set:
    """Promote p to a center if it is unblocked; flag a witness when full."""
    if p in node.centers or node.edges[p]:
        node.refresh_witness(k)
        return set()
    if len(node.centers) < k:
        node.centers.add(p)
        for v in node.points:
            if v != p and dist(p, v) <= opt_prime:
                node.edges[p].add(v)
                node.edges[v].add(p)
        node.refresh_witness(k)
        return {p}
    node.refresh_witness(k)
    return set()


def node_insert(node: TreeNode, p, opt_prime: float, dist, k: int,
                capacity: int | None = None) -> set:
    """Add p to the node's blocking graph, then attempt promotion."""
    if p in node.points:
        raise CapacityExceeded(f"point {p!r} already stored in this node")
    if capacity is not None and len(node.points) >= capacity:
        raise CapacityExceeded("leaf is full; caller must pick a non-full leaf")
    node.points[p] = None
    node.edges[p] = set()
    for v in node.points:
        if v != p and v in node.centers and dist(p, v) <= opt_prime:
            node.edges[v].add(p)
            node.edges[p].add(v)
    return try_make_center(node, p, opt_prime, dist, k)


def node_delete(node: TreeNode, p, opt_prime: float, dist, k: int) -> set:
    """Remove p; if it was a center, try to promote unblocked points."""
    if p not in node.points:
        raise UnknownPoint(f"point {p!r} not stored in this node")
    neighbors = sorted(node.edges[p], key=_key)
    for v in neighbors:
        node.edges[v].discard(p)
    del node.edges[p]
    del node.points[p]
    was_center = p in node.centers
    node.centers.discard(p)
    promoted: set = set()
    if was_center:
        for u in neighbors:
            promoted |= try_make_center(node, u, opt_prime, dist, k)
        # the freed center slot may also unstall a point that was unblocked
        # while the node was full; sweep so that "centers < k and some point
        # unblocked" never survives an update
        for q in sorted(node.points, key=_key):
            if q not in node.centers and not node.edges[q]:
                promoted |= try_make_center(node, q, opt_prime, dist, k)
    node.refresh_witness(k)
    return promoted


class GuessTree:
    """Clustering tree for one guessed optimum OPT'."""

    def __init__(self, opt_prime: float, k: int, B: int, dist):
        self.opt_prime = opt_prime
        self.k = k
        self.B = B
        self.capacity = B * k
        self.dist = dist
        self.root = TreeNode()
        self.leaves: list[TreeNode] = [self.root]
        self.leaf_of: dict = {}

    # -- structure maintenance -------------------------------------------

    def _target_leaf(self) -> TreeNode:
        deepest = max(leaf.depth for leaf in self.leaves)
        for leaf in self.leaves:
            if leaf.depth == deepest and len(leaf.points) < self.capacity:
                return leaf
        self._split_next()
        deepest = max(leaf.depth for leaf in self.leaves)
        for leaf in self.leaves:
            if leaf.depth == deepest and len(leaf.points) < self.capacity:
                return leaf
        raise CapacityExceeded("split produced no free leaf")  # unreachable

    def _split_next(self) -> None:
        """Turn the left-most shallowest leaf into an inner node.

        The leaf's content moves into its first child; B-1 empty siblings
        come after it; the node itself keeps only its centers, as an inner
        node stores exactly the centers of its children.
        """
        shallowest = min(leaf.depth for leaf in self.leaves)
        idx = next(i for i, leaf in enumerate(self.leaves)
                   if leaf.depth == shallowest)
        node = self.leaves[idx]
        copy = TreeNode(parent=node, depth=node.depth + 1)
        copy.points = dict(node.points)
        copy.centers = set(node.centers)
        copy.edges = {p: set(adj) for p, adj in node.edges.items()}
        copy.witness = node.witness
        siblings = [TreeNode(parent=node, depth=node.depth + 1)
                    for _ in range(self.B - 1)]
        node.children = [copy] + siblings
        node.points = {c: None for c in sorted(node.centers, key=_key)}
        node.edges = {c: set() for c in node.points}
        node.refresh_witness(self.k)
        for p in copy.points:
            self.leaf_of[p] = copy
        self.leaves[idx:idx + 1] = node.children

    def _maybe_contract(self, node: TreeNode | None) -> None:
        """Fold a fully drained sibling group back into its parent."""
        while node is not None and node.children:
            if not all(c.is_leaf for c in node.children):
                return
            if any(c.points for c in node.children[1:]):
                return
            first = node.children[0]
            node.points = first.points
            node.centers = first.centers
            node.edges = first.edges
            node.witness = first.witness
            idx = self.leaves.index(first)
            self.leaves[idx:idx + self.B] = [node]
            node.children = []
            for p in node.points:
                self.leaf_of[p] = node
            node = node.parent if not node.points else None

    # -- point updates ------------------------------------------------------

    def insert_point(self, p) -> None:
        leaf = self._target_leaf()
        self.leaf_of[p] = leaf
        promoted = node_insert(leaf, p, self.opt_prime, self.dist, self.k,
                               capacity=self.capacity)
        node = leaf.parent
        while promoted and node is not None:
            promoted = node_insert(node, p, self.opt_prime, self.dist, self.k)
            node = node.parent

    def _propagating_delete(self, p) -> None:
        node = self.leaf_of.pop(p)
        carry: set = set()
        while node is not None:
            if p in node.points:
                carry |= node_delete(node, p, self.opt_prime, self.dist, self.k)
            if node.parent is not None:
                lifted: set = set()
                for v in sorted(carry, key=_key):
                    lifted |= node_insert(node.parent, v, self.opt_prime,
                                          self.dist, self.k)
                carry = lifted
            node = node.parent

    def delete_point(self, p) -> None:
        if p not in self.leaf_of:
            raise UnknownPoint(f"point {p!r} is not in this tree")
        leaf = self.leaf_of[p]
        donor = self._donor_leaf()
        self._propagating_delete(p)
        if donor is not leaf and donor.points:
            # completeness-preserving swap: move the cheapest donor point over
            q = min(donor.points, key=lambda x: (len(donor.edges[x]), _key(x)))
            self._propagating_delete(q)
            self.leaf_of[q] = leaf
            promoted = node_insert(leaf, q, self.opt_prime, self.dist, self.k,
                                   capacity=self.capacity)
            node = leaf.parent
            while promoted and node is not None:
                promoted = node_insert(node, q, self.opt_prime, self.dist, self.k)
                node = node.parent
        if not donor.points:
            self._maybe_contract(donor.parent)

    def _donor_leaf(self) -> TreeNode:
        deepest = max(leaf.depth for leaf in self.leaves)
        for leaf in reversed(self.leaves):
            if leaf.depth == deepest and leaf.points:
                return leaf
        # deepest level fully drained: fall back to right-most non-empty leaf
        for leaf in reversed(self.leaves):
            if leaf.points:
                return leaf
        return self.leaves[-1]

    # -- views ----------------------------------------------------------------

    def iter_nodes(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(node.children)

    def witnessed_nodes(self) -> list[TreeNode]:
        return [node for node in self.iter_nodes() if node.witness]

    @property
    def has_witness(self) -> bool:
        return any(node.witness for node in self.iter_nodes())

    def root_centers(self) -> list:
        return sorted(self.root.centers, key=_key)

    def depth(self) -> int:
        return max(leaf.depth for leaf in self.leaves)


@dataclass
class DetTreeSolution:
    """Root centers of the smallest witness-free guess."""

    cost_estimate: float
    centers: tuple
    opt_prime: float | None
    guess_index: int | None

    @property
    def num_centers(self) -> int:
        return len(self.centers)


def default_branching(n_hint: int, aspect_ratio: float) -> int:
    return max(2, math.ceil(math.log2(max(2.0, n_hint + aspect_ratio))))


class DetTreeEngine:
    """Deterministic dynamic k-center against metric-adaptive adversaries."""

    def __init__(self, oracle: DistanceOracle, k: int, eps: float,
                 r_min: float, r_max: float, B: int | None = None,
                 n_hint: int = 1024):
        self.oracle = oracle
        self.k = k
        self.eps = eps
        if B is None:
            B = default_branching(n_hint, r_max / r_min)
        if B < 2:
            raise ValueError("branching factor B must be at least 2")
        self.B = B
        guesses = [r_min]
        while guesses[-1] < r_max:
            guesses.append(guesses[-1] * (1.0 + eps))
        self.guesses = guesses
        dist = oracle.distance
        self.trees = [GuessTree(g, k, B, dist) for g in guesses]
        self.stats = StreamStats()
        self._solution: DetTreeSolution | None = None

    def update(self, op: UpdateOp) -> DetTreeSolution:
        if op.kind == INSERT:
            self.oracle.add_point(op.id, op.coords)
        self.stats.apply_update(op)
        for tree in self.trees:
            if op.kind == INSERT:
                tree.insert_point(op.id)
            else:
                tree.delete_point(op.id)
        self._solution = self.report()
        return self._solution

    def report(self) -> DetTreeSolution:
        active = self.stats.active
        if len(active) <= self.k:
            return DetTreeSolution(
                cost_estimate=0.0,
                centers=tuple(sorted(active, key=_key)),
                opt_prime=None,
                guess_index=None,
            )
        for i, tree in enumerate(self.trees):
            if not tree.has_witness:
                chain = tree.depth() + 1
                return DetTreeSolution(
                    cost_estimate=chain * tree.opt_prime,
                    centers=tuple(tree.root_centers()),
                    opt_prime=tree.opt_prime,
                    guess_index=i,
                )
        raise AssertionError("top guess >= r_max cannot carry a witness")

    def membership_query(self, p: PointId) -> PointId:
        """Nearest root center of the winning guess; O(k) distance queries."""
        if p not in self.stats.active:
            raise UnknownPoint(f"point {p!r} is not active")
        sol = self._solution or self.report()
        if sol.guess_index is None:
            return p
        return min(sol.centers, key=lambda c: (self.oracle.distance(p, c), _key(c)))

    def witness_count(self) -> int:
        return sum(1 for tree in self.trees if tree.has_witness)

    def realized_cost(self) -> float:
        sol = self._solution or self.report()
        if not sol.centers:
            return 0.0
        active = self.stats.active
        if sol.guess_index is None:
            return 0.0
        return max(
            min(self.oracle.raw_distance(p, c) for c in sol.centers)
            for p in active
        )
