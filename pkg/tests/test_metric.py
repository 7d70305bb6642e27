"""Metric core: oracles, counting, streams, scale ladders."""

import math
import random

import pytest

from dynclust.errors import (
    DeleteOfInactive,
    DuplicateInsert,
    MalformedStream,
    UnknownPoint,
)
from dynclust.metric import (
    DELETE,
    INSERT,
    EuclideanOracle,
    HammingOracle,
    JaccardOracle,
    LpOracle,
    MatrixOracle,
    ScaleLadder,
    StreamStats,
    UpdateOp,
    coordinate_bounds,
    delete,
    insert,
    parse_stream,
    write_stream,
)

from conftest import random_points


def test_apply_update_counters():
    stats = StreamStats()
    stats.apply_update(insert("p1", (0, 0)))
    assert stats.n_active == 1 and stats.n_max == 1 and stats.t == 1
    stats.apply_update(delete("p1"))
    assert stats.n_active == 0 and stats.n_max == 1 and stats.t == 2


def test_apply_update_rejects_duplicate_insert():
    stats = StreamStats()
    stats.apply_update(insert("p1"))
    with pytest.raises(DuplicateInsert):
        stats.apply_update(insert("p1"))


def test_apply_update_rejects_delete_of_inactive():
    stats = StreamStats()
    with pytest.raises(DeleteOfInactive):
        stats.apply_update(delete("ghost"))


def test_delete_op_carries_no_coords():
    with pytest.raises(MalformedStream):
        UpdateOp(DELETE, "p", (1.0,))


def test_euclidean_345():
    o = EuclideanOracle()
    o.add_point("a", (0, 0))
    o.add_point("b", (3, 4))
    assert o.distance("a", "b") == pytest.approx(5.0)


def test_jaccard_identical_and_empty():
    o = JaccardOracle()
    o.add_point("a", {1, 2})
    o.add_point("b", {1, 2})
    o.add_point("e1", set())
    o.add_point("e2", set())
    assert o.distance("a", "b") == 0.0
    assert o.distance("e1", "e2") == 0.0
    assert o.distance("a", "e1") == 1.0


def test_matrix_lookup():
    m = [[0.0] * 6 for _ in range(6)]
    m[2][5] = m[5][2] = 7.0
    o = MatrixOracle(m)
    for i in range(6):
        o.add_point(f"p{i}")
    assert o.distance("p2", "p5") == 7.0


def test_unknown_point_raises():
    o = EuclideanOracle()
    o.add_point("a", (0, 0))
    with pytest.raises(UnknownPoint):
        o.distance("a", "nope")


def test_query_counter_audited():
    o = EuclideanOracle()
    pts = random_points(10, seed=3)
    for i, p in enumerate(pts):
        o.add_point(i, p)
    rng = random.Random(7)
    calls = 0
    for _ in range(200):
        a, b = rng.randrange(10), rng.randrange(10)
        o.distance(a, b)
        calls += 1
    assert o.query_counter == calls
    o.raw_distance(0, 1)
    assert o.query_counter == calls  # raw calls are uncounted


@pytest.mark.parametrize("kind", ["l2", "lp", "hamming", "jaccard"])
def test_triangle_inequality_sampled(kind):
    rng = random.Random(11)
    if kind == "l2":
        o = EuclideanOracle()
        payload = lambda: tuple(rng.random() for _ in range(3))
    elif kind == "lp":
        o = LpOracle(1.5)
        payload = lambda: tuple(rng.random() for _ in range(3))
    elif kind == "hamming":
        o = HammingOracle()
        payload = lambda: tuple(rng.randint(0, 1) for _ in range(16))
    else:
        o = JaccardOracle()
        payload = lambda: {rng.randrange(12) for _ in range(rng.randrange(1, 8))}
    ids = list(range(20))
    for i in ids:
        o.add_point(i, payload())
    for _ in range(400):
        x, y, z = rng.sample(ids, 3)
        dxz = o.raw_distance(x, z)
        dxy = o.raw_distance(x, y)
        dyz = o.raw_distance(y, z)
        assert dxz <= dxy + dyz + 1e-9 * max(1.0, dxz)
        assert o.raw_distance(x, y) == pytest.approx(o.raw_distance(y, x))
        assert o.raw_distance(x, x) == 0.0


def test_scale_ladder_shape():
    lad = ScaleLadder.build(0.5, 1.0, 128.0)
    assert lad.scales[0] == 1.0
    assert lad.scales[-1] >= 128.0
    ratios = [b / a for a, b in zip(lad.scales, lad.scales[1:])]
    assert all(r == pytest.approx(1.25) for r in ratios)
    expected = math.ceil(math.log(128.0) / math.log(1.25)) + 1
    assert len(lad) <= expected + 1


def test_stream_roundtrip(tmp_path):
    ops = [
        insert("p1", (0.0, 0.0)),
        insert("p2", (3.0, 4.0)),
        delete("p1"),
    ]
    path = tmp_path / "s.txt"
    write_stream(path, "euclidean-l2", ops, dim=2)
    oracle, parsed = parse_stream(path)
    assert oracle.metric_kind == "euclidean-l2"
    assert [op.kind for op in parsed] == [INSERT, INSERT, DELETE]
    assert parsed[1].coords == (3.0, 4.0)
    assert oracle.declared_dim == 2


def test_stream_matrix_file(tmp_path):
    mat = [[0.0, 2.0], [2.0, 0.0]]
    (tmp_path / "d.csv").write_text("0,2\n2,0\n")
    path = tmp_path / "s.txt"
    path.write_text("# metric=matrix file=d.csv\n+ a\n+ b\n")
    oracle, ops = parse_stream(path)
    for op in ops:
        oracle.add_point(op.id)
    assert oracle.distance("a", "b") == 2.0


def test_stream_rejects_garbage(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("# metric=euclidean-l2\n* p1 0 0\n")
    with pytest.raises(MalformedStream):
        parse_stream(path)


def test_coordinate_bounds():
    ops = [insert("a", (0.0, 0.0)), insert("b", (3.0, 4.0)), delete("a")]
    lo, hi = coordinate_bounds(ops)
    assert hi == pytest.approx(5.0)
    assert lo < hi
