"""Point identity, update streams, distance oracles and scale ladders.

Everything downstream (the MIS engines, the clustering tree, the primal-dual
solver) talks to the metric exclusively through :class:`DistanceOracle`, which
interns point ids to dense integers, keeps payloads of deleted points around
(adversarial oracles must still answer queries about them), and counts every
distance evaluation.
"""

from __future__ import annotations

import hashlib
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .errors import (
    DeleteOfInactive,
    DuplicateInsert,
    MalformedStream,
    UnknownPoint,
    UnsupportedKind,
)

PointId = str | int

INSERT = "+"
DELETE = "-"


def derive_seed(*parts) -> int:
    """Stable 63-bit child seed from a master seed and arbitrary tags."""
    digest = hashlib.md5(repr(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & (2**63 - 1)


@dataclass(frozen=True)
class UpdateOp:
    """One stream update: an insertion (with payload) or a deletion."""

    kind: str  # INSERT or DELETE
    id: PointId
    coords: tuple | None = None

    def __post_init__(self):
        if self.kind not in (INSERT, DELETE):
            raise MalformedStream(f"bad update kind {self.kind!r}")
        if self.kind == DELETE and self.coords is not None:
            raise MalformedStream("delete ops carry no coordinates")


def insert(pid: PointId, coords: Sequence | None = None) -> UpdateOp:
    return UpdateOp(INSERT, pid, tuple(coords) if coords is not None else None)


def delete(pid: PointId) -> UpdateOp:
    return UpdateOp(DELETE, pid)


@dataclass
class StreamStats:
    """Counters over the update stream: current index, active set, high-water mark."""

    t: int = 0
    n_active: int = 0
    n_max: int = 0
    active: set = field(default_factory=set)

    def apply_update(self, op: UpdateOp) -> "StreamStats":
        if op.kind == INSERT:
            if op.id in self.active:
                raise DuplicateInsert(f"point {op.id!r} is already active")
            self.active.add(op.id)
            self.n_active += 1
            self.n_max = max(self.n_max, self.n_active)
        else:
            if op.id not in self.active:
                raise DeleteOfInactive(f"point {op.id!r} is not active")
            self.active.remove(op.id)
            self.n_active -= 1
        self.t += 1
        return self


def apply_update(stats: StreamStats, op: UpdateOp) -> StreamStats:
    """Module-level alias for :meth:`StreamStats.apply_update`."""
    return stats.apply_update(op)


class DistanceOracle:
    """Base distance oracle with id interning and query counting.

    Subclasses implement :meth:`_dist` on dense indices. ``distance`` is the
    counted entry point used by the engines; ``raw_distance`` bypasses the
    counter and exists for verifier passes and tests that must not perturb
    telemetry.
    """

    metric_kind = "abstract"

    def __init__(self):
        self._index: dict[PointId, int] = {}
        self._payloads: list = []
        self.query_counter = 0
        self._lock = threading.Lock()

    # -- id interning -------------------------------------------------

    def add_point(self, pid: PointId, payload) -> int:
        """Register a point (idempotent for re-inserts of a deleted id)."""
        idx = self._index.get(pid)
        if idx is None:
            idx = len(self._payloads)
            self._index[pid] = idx
            self._payloads.append(self._prepare(payload))
        elif payload is not None:
            self._payloads[idx] = self._prepare(payload)
        return idx

    def knows(self, pid: PointId) -> bool:
        return pid in self._index

    def index_of(self, pid: PointId) -> int:
        try:
            return self._index[pid]
        except KeyError:
            raise UnknownPoint(f"point {pid!r} was never inserted") from None

    def payload_of(self, pid: PointId):
        return self._payloads[self.index_of(pid)]

    def _prepare(self, payload):
        return payload

    # -- distances ----------------------------------------------------

    def distance(self, a: PointId, b: PointId) -> float:
        ia, ib = self.index_of(a), self.index_of(b)
        with self._lock:
            self.query_counter += 1
        if ia == ib:
            return 0.0
        return self._dist(ia, ib)

    def raw_distance(self, a: PointId, b: PointId) -> float:
        ia, ib = self.index_of(a), self.index_of(b)
        if ia == ib:
            return 0.0
        return self._dist(ia, ib)

    def _dist(self, ia: int, ib: int) -> float:
        raise NotImplementedError


class EuclideanOracle(DistanceOracle):
    metric_kind = "euclidean-l2"

    def _prepare(self, payload):
        if payload is None:
            raise MalformedStream("coordinate metric requires coordinates")
        return tuple(float(x) for x in payload)

    def _dist(self, ia, ib):
        return math.dist(self._payloads[ia], self._payloads[ib])


class LpOracle(DistanceOracle):
    metric_kind = "lp"

    def __init__(self, p: float):
        super().__init__()
        if p < 1:
            raise UnsupportedKind(f"lp metric needs p >= 1, got {p}")
        self.p = float(p)

    def _prepare(self, payload):
        if payload is None:
            raise MalformedStream("coordinate metric requires coordinates")
        return tuple(float(x) for x in payload)

    def _dist(self, ia, ib):
        a, b = self._payloads[ia], self._payloads[ib]
        p = self.p
        if math.isinf(p):
            return max(abs(x - y) for x, y in zip(a, b))
        return sum(abs(x - y) ** p for x, y in zip(a, b)) ** (1.0 / p)


class HammingOracle(DistanceOracle):
    """Bit vectors; distance is the number of differing positions."""

    metric_kind = "hamming"

    def _prepare(self, payload):
        if payload is None:
            raise MalformedStream("hamming metric requires a bit vector")
        bits = tuple(int(x) for x in payload)
        if any(b not in (0, 1) for b in bits):
            raise MalformedStream("hamming coordinates must be 0/1")
        return bits

    def _dist(self, ia, ib):
        a, b = self._payloads[ia], self._payloads[ib]
        return float(sum(x != y for x, y in zip(a, b)))

    def dim(self) -> int:
        if not self._payloads:
            raise UnknownPoint("no points registered yet")
        return len(self._payloads[0])


class JaccardOracle(DistanceOracle):
    """Finite sets; distance 1 - |A∩B|/|A∪B|, with empty∪empty at distance 0."""

    metric_kind = "jaccard"

    def _prepare(self, payload):
        if payload is None:
            raise MalformedStream("jaccard metric requires set elements")
        return frozenset(int(x) for x in payload)

    def _dist(self, ia, ib):
        a, b = self._payloads[ia], self._payloads[ib]
        union = len(a | b)
        if union == 0:
            return 0.0
        return 1.0 - len(a & b) / union

    def set_of(self, pid: PointId) -> frozenset:
        return self._payloads[self.index_of(pid)]


class MatrixOracle(DistanceOracle):
    """Distances read from a full symmetric matrix, rows indexed by insertion order."""

    metric_kind = "matrix"

    def __init__(self, matrix: Sequence[Sequence[float]]):
        super().__init__()
        self.matrix = [list(map(float, row)) for row in matrix]
        n = len(self.matrix)
        if any(len(row) != n for row in self.matrix):
            raise MalformedStream("distance matrix must be square")

    def _prepare(self, payload):
        return None  # row index is the interned index itself

    def add_point(self, pid: PointId, payload=None) -> int:
        idx = super().add_point(pid, None)
        if idx >= len(self.matrix):
            raise MalformedStream(
                f"matrix has {len(self.matrix)} rows but point #{idx} was inserted"
            )
        return idx

    def _dist(self, ia, ib):
        return self.matrix[ia][ib]


class CallableOracle(DistanceOracle):
    """Wraps an external answer function; used for the metric-adaptive adversary."""

    metric_kind = "adversary"

    def __init__(self, answer: Callable[[PointId, PointId], float]):
        super().__init__()
        self._answer = answer

    def _prepare(self, payload):
        return None

    def _dist(self, ia, ib):
        # the answer function works on external ids
        rev = self._reverse()
        return float(self._answer(rev[ia], rev[ib]))

    def _reverse(self):
        if not hasattr(self, "_rev") or len(self._rev) != len(self._index):
            self._rev = {v: k for k, v in self._index.items()}
        return self._rev


@dataclass(frozen=True)
class ScaleLadder:
    """Geometric grid of threshold scales r_min*(1+eps/2)^i covering [r_min, r_max]."""

    eps: float
    r_min: float
    r_max: float
    scales: tuple[float, ...]

    @classmethod
    def build(cls, eps: float, r_min: float, r_max: float) -> "ScaleLadder":
        if not 0 < eps <= 1:
            raise ValueError("eps must lie in (0, 1]")
        if r_min <= 0 or r_max < r_min:
            raise ValueError("need 0 < r_min <= r_max")
        step = 1.0 + eps / 2.0
        scales = [r_min]
        while scales[-1] < r_max:
            scales.append(scales[-1] * step)
        return cls(eps=eps, r_min=r_min, r_max=r_max, scales=tuple(scales))

    @property
    def aspect_ratio(self) -> float:
        return self.r_max / self.r_min

    def __len__(self) -> int:
        return len(self.scales)


# ----------------------------------------------------------------------
# Stream files
# ----------------------------------------------------------------------

def make_oracle(kind: str, *, p: float | None = None,
                matrix: Sequence[Sequence[float]] | None = None) -> DistanceOracle:
    if kind == "euclidean-l2":
        return EuclideanOracle()
    if kind == "lp":
        if p is None:
            raise UnsupportedKind("lp metric needs p=")
        return LpOracle(p)
    if kind == "hamming":
        return HammingOracle()
    if kind == "jaccard":
        return JaccardOracle()
    if kind == "matrix":
        if matrix is None:
            raise UnsupportedKind("matrix metric needs a matrix")
        return MatrixOracle(matrix)
    raise UnsupportedKind(f"unknown metric kind {kind!r}")


def parse_stream(path: str | Path) -> tuple[DistanceOracle, list[UpdateOp]]:
    """Parse a stream file.

    Format: a header line ``# metric=<kind> [dim=<d>] [p=<p>] [file=<csv>]``
    followed by ``+ <id> <coord...>`` and ``- <id>`` lines. For the matrix
    metric the CSV referenced by ``file=`` holds the full symmetric distance
    matrix indexed by insertion order.
    """
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    header = None
    ops: list[UpdateOp] = []
    for ln, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if header is None:
                header = _parse_header(line, ln)
            continue
        parts = line.split()
        if parts[0] == INSERT:
            if len(parts) < 2:
                raise MalformedStream(f"line {ln}: insert needs an id")
            coords = tuple(_num(tok) for tok in parts[2:]) or None
            ops.append(UpdateOp(INSERT, parts[1], coords))
        elif parts[0] == DELETE:
            if len(parts) != 2:
                raise MalformedStream(f"line {ln}: delete takes exactly an id")
            ops.append(UpdateOp(DELETE, parts[1]))
        else:
            raise MalformedStream(f"line {ln}: expected '+' or '-', got {parts[0]!r}")
    if header is None:
        raise MalformedStream("stream file is missing the '# metric=...' header")
    kind, kv = header
    if kind == "matrix":
        mpath = kv.get("file")
        if mpath is None:
            raise MalformedStream("matrix metric header needs file=<csv>")
        matrix = _read_matrix_csv(path.parent / mpath)
        oracle = make_oracle("matrix", matrix=matrix)
    elif kind == "lp":
        oracle = make_oracle("lp", p=float(kv.get("p", 2.0)))
    else:
        oracle = make_oracle(kind)
    oracle.declared_dim = int(kv["dim"]) if "dim" in kv else None
    return oracle, ops


def _parse_header(line: str, ln: int) -> tuple[str, dict]:
    tokens = line.lstrip("#").split()
    kv = {}
    for tok in tokens:
        if "=" not in tok:
            raise MalformedStream(f"line {ln}: bad header token {tok!r}")
        key, val = tok.split("=", 1)
        kv[key] = val
    kind = kv.pop("metric", None)
    if kind is None:
        raise MalformedStream(f"line {ln}: header lacks metric=")
    return kind, kv


def _read_matrix_csv(path: Path) -> list[list[float]]:
    import csv

    with open(path, newline="") as fh:
        return [[float(cell) for cell in row] for row in csv.reader(fh) if row]


def _num(tok: str):
    try:
        return int(tok)
    except ValueError:
        return float(tok)


def write_stream(path: str | Path, kind: str, ops: Iterable[UpdateOp], *,
                 dim: int | None = None, p: float | None = None,
                 matrix_file: str | None = None) -> None:
    """Write a stream file in the format read by :func:`parse_stream`."""
    tokens = [f"metric={kind}"]
    if dim is not None:
        tokens.append(f"dim={dim}")
    if p is not None:
        tokens.append(f"p={p}")
    if matrix_file is not None:
        tokens.append(f"file={matrix_file}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# " + " ".join(tokens) + "\n")
        for op in ops:
            if op.kind == INSERT:
                coord_txt = " ".join(str(c) for c in (op.coords or ()))
                fh.write(f"+ {op.id} {coord_txt}".rstrip() + "\n")
            else:
                fh.write(f"- {op.id}\n")


def coordinate_bounds(ops: Iterable[UpdateOp]) -> tuple[float, float] | None:
    """Scan insert payloads and bound the diameter from the coordinate box.

    Returns (r_min_guess, r_max_bound) for coordinate metrics, or None when
    no insert carries coordinates. r_max is the l2 diameter of the bounding
    box (valid for l2/lp with p>=1 up to dimension factors handled by caller);
    r_min defaults to r_max / 2**20 unless the caller knows better.
    """
    lo: list[float] | None = None
    hi: list[float] | None = None
    for op in ops:
        if op.kind != INSERT or op.coords is None:
            continue
        vec = [float(x) for x in op.coords]
        if lo is None:
            lo, hi = list(vec), list(vec)
        else:
            for i, x in enumerate(vec):
                lo[i] = min(lo[i], x)
                hi[i] = max(hi[i], x)
    if lo is None:
        return None
    diam = math.dist(lo, hi)
    if diam <= 0:
        diam = 1.0
    return diam / 2.0**20, diam
