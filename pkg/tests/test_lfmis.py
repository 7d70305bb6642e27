"""LFMIS engine: hand-built examples, canonical equivalence, leader validity."""

import random

import pytest

from dynclust.errors import DeleteOfInactive, DuplicateInsert, UnknownPoint
from dynclust.lfmis import LfmisInstance, eliminator_oracle
from dynclust.metric import delete, insert
from dynclust.oracles import greedy_lfmis

from conftest import BitsetLfmis, churn_stream, distance_matrix, random_points


def adj_oracle(adjacency):
    return lambda a, b: b in adjacency[a]


RANK = {name: int(frac * (1 << 63)) for name, frac in
        {"a": 0.2, "b": 0.1, "c": 0.3, "v": 0.05, "w": 0.5, "x": 0.9}.items()}


def test_insert_into_empty():
    inst = LfmisInstance(2, edge_oracle=lambda a, b: False, seed=0)
    inst.process_update(insert("v"))
    assert inst.alg_vertices() == ["v"]
    assert inst.queue_vertices() == set()
    assert inst.leader["v"] is None


def test_clique_collapses_to_min_rank():
    adjacency = {v: {u for u in "abc" if u != v} for v in "abc"}
    inst = LfmisInstance(2, edge_oracle=adj_oracle(adjacency), seed=0)
    for v in "abc":
        inst.process_update(insert(v), rank=RANK[v])
    assert inst.alg_vertices() == ["b"]  # b carries the smallest rank
    assert inst.leader["a"] == "b" and inst.leader["c"] == "b"


def test_path_delete_recovers_endpoints():
    # path a-b-c with b ranked first: alg={b}; deleting b frees both ends
    adjacency = {"a": {"b"}, "b": {"a", "c"}, "c": {"b"}}
    inst = LfmisInstance(1, edge_oracle=adj_oracle(adjacency), seed=0)
    ranks = {"b": 1000, "a": 2000, "c": 3000}
    for v in "abc":
        inst.process_update(insert(v), rank=ranks[v])
    assert inst.alg_vertices() == ["b"]
    assert inst.leader["a"] == "b" and inst.leader["c"] == "b"
    inst.process_update(delete("b"))
    assert inst.alg_vertices() == ["a", "c"]


def test_isolated_vertices_split_alg_and_queue():
    inst = LfmisInstance(2, edge_oracle=lambda a, b: False, seed=0)
    ranks = {}
    for i in range(5):
        ranks[i] = (i + 1) * 1000
        inst.process_update(insert(i), rank=ranks[i])
    assert inst.alg_vertices() == [0, 1, 2]  # three lowest ranks, k+1 = 3
    assert inst.queue_vertices() == {3, 4}


def test_insert_high_rank_goes_to_queue():
    inst = LfmisInstance(1, edge_oracle=lambda a, b: False, seed=0)
    inst.process_update(insert("a"), rank=100)
    inst.process_update(insert("b"), rank=200)
    inst.process_update(insert("x"), rank=RANK["x"])
    assert inst.alg_vertices() == ["a", "b"]
    assert inst.queue_vertices() == {"x"}


def test_insert_low_rank_takes_over_neighbor():
    adjacency = {"a": {"v"}, "v": {"a"}}
    inst = LfmisInstance(1, edge_oracle=adj_oracle(adjacency), seed=0)
    inst.process_update(insert("a"), rank=RANK["a"])
    inst.process_update(insert("v"), rank=RANK["v"])
    assert inst.alg_vertices() == ["v"]
    assert inst.leader["a"] == "v"
    assert "a" in inst.followers_of("v")


def test_insert_higher_rank_becomes_follower():
    adjacency = {"a": {"w"}, "w": {"a"}}
    inst = LfmisInstance(1, edge_oracle=adj_oracle(adjacency), seed=0)
    inst.process_update(insert("a"), rank=RANK["a"])
    inst.process_update(insert("w"), rank=RANK["w"])
    assert inst.alg_vertices() == ["a"]
    assert inst.leader["w"] == "a"


def test_delete_follower_only_shrinks_list():
    adjacency = {"a": {"w"}, "w": {"a"}}
    inst = LfmisInstance(1, edge_oracle=adj_oracle(adjacency), seed=0)
    inst.process_update(insert("a"), rank=RANK["a"])
    inst.process_update(insert("w"), rank=RANK["w"])
    inst.process_update(delete("w"))
    assert inst.alg_vertices() == ["a"]
    assert inst.followers_of("a") == frozenset()


def test_delete_sole_leader_promotes_min_rank_follower():
    adjacency = {v: {u for u in "vabc" if u != v} for v in "vabc"}
    inst = LfmisInstance(3, edge_oracle=adj_oracle(adjacency), seed=0)
    inst.process_update(insert("v"), rank=RANK["v"])
    for v in "abc":
        inst.process_update(insert(v), rank=RANK[v])
    assert inst.alg_vertices() == ["v"]
    before = inst.queue_insertions
    inst.process_update(delete("v"))
    # three followers spilled to the queue, then the drain re-elects by rank
    assert inst.queue_insertions - before >= 3
    assert inst.alg_vertices() == ["b"]
    assert inst.leader["a"] == "b" and inst.leader["c"] == "b"


def test_delete_queued_nonleader_touches_nothing_else():
    inst = LfmisInstance(1, edge_oracle=lambda a, b: False, seed=0)
    for i, rk in [(0, 100), (1, 200), (2, 300)]:
        inst.process_update(insert(i), rank=rk)
    assert inst.queue_vertices() == {2}
    alg_before = inst.alg_vertices()
    inst.process_update(delete(2))
    assert inst.alg_vertices() == alg_before
    assert inst.queue_vertices() == set()


def test_duplicate_and_missing_raise():
    inst = LfmisInstance(1, edge_oracle=lambda a, b: False, seed=0)
    inst.process_update(insert("a"))
    with pytest.raises(DuplicateInsert):
        inst.process_update(insert("a"))
    with pytest.raises(DeleteOfInactive):
        inst.process_update(delete("zzz"))


def test_eliminator_oracle_examples():
    assert eliminator_oracle({"v": set()}, {"v": 0.5}, "v") == "v"
    clique = {v: {u for u in "abc" if u != v} for v in "abc"}
    ranks = {"a": 0.1, "b": 0.5, "c": 0.9}
    assert eliminator_oracle(clique, ranks, "c") == "a"
    path = {"a": {"b"}, "b": {"a", "c"}, "c": {"b"}}
    pranks = {"b": 0.1, "a": 0.2, "c": 0.3}
    assert eliminator_oracle(path, pranks, "a") == "b"
    del path["b"]
    path["a"].discard("b")
    path["c"].discard("b")
    assert eliminator_oracle(path, pranks, "a") == "a"
    with pytest.raises(UnknownPoint):
        eliminator_oracle({"a": set()}, {"a": 0.1}, "zz")


def _run_canonical_stream(n_pool, updates, k, seed, r_quantile=0.12):
    pts = random_points(n_pool, seed)
    dmat = distance_matrix(pts)
    flat = sorted(dmat[i][j] for i in range(n_pool) for j in range(i + 1, n_pool))
    r = flat[int(len(flat) * r_quantile)]
    oracle = BitsetLfmis(dmat, r)
    inst = LfmisInstance(k, edge_oracle=lambda a, b: dmat[a][b] <= r, seed=seed)
    ops = churn_stream(n_pool, updates, seed + 1)
    mismatches = 0
    for op in ops:
        inst.process_update(op)
        ranked = sorted((rk, v) for v, rk in inst.rank.items())
        expect = oracle.top(ranked, k + 1)
        if inst.alg_vertices() != expect:
            mismatches += 1
        # leader validity whenever the solution is complete
        if inst.solution_valid:
            assert not inst.queue_vertices()
            alg = set(inst.alg_vertices())
            for v in inst.rank:
                if v not in alg:
                    led = inst.leader[v]
                    assert led in alg and dmat[v][led] <= r
    return mismatches


@pytest.mark.parametrize("k,seed", [(1, 10), (3, 11), (10, 12)])
def test_canonical_equivalence_small(k, seed):
    assert _run_canonical_stream(60, 400, k, seed) == 0


def test_history_independence():
    pts = random_points(30, seed=21)
    dmat = distance_matrix(pts)
    r = 0.35
    ranks = {i: (i * 7919) % (1 << 30) + 1 for i in range(30)}
    final = list(range(0, 30, 2))

    def run(order_seed):
        inst = LfmisInstance(4, edge_oracle=lambda a, b: dmat[a][b] <= r, seed=0)
        rng = random.Random(order_seed)
        # random interleaving that ends with exactly `final` active
        others = [i for i in range(30) if i not in final]
        inserted = []
        for v in final:
            extra = rng.sample(others, 3)
            for e in extra:
                if e not in inserted:
                    inst.process_update(insert(e), rank=ranks[e])
                    inserted.append(e)
            inst.process_update(insert(v), rank=ranks[v])
        for e in inserted:
            inst.process_update(delete(e))
        return inst

    a = run(1)
    b = run(2)
    assert a.alg_vertices() == b.alg_vertices()
    if a.solution_valid and b.solution_valid:
        alg = set(a.alg_vertices())
        for v in final:
            la, lb = a.leader.get(v), b.leader.get(v)
            if la is not None and lb is not None:
                assert la in alg and lb in alg


def test_amortized_work_ratio_between_sizes():
    """Per-update queue traffic and edge queries grow like polylog(n):
    the growth factor between n=256 and n=4096 stays within 3x the
    corresponding log ratios."""
    import math

    k = 3
    stats = {}
    for n in (256, 4096):
        pts = random_points(n, seed=31)
        dmat = distance_matrix(pts)
        flat = sorted(dmat[i][j] for i in range(n) for j in range(i + 1, n))
        r = flat[int(len(flat) * 0.05)]
        inst = LfmisInstance(k, edge_oracle=lambda a, b, _r=r: dmat[a][b] <= _r,
                             seed=5)
        ops = churn_stream(n, 2 * n, seed=32)
        for op in ops:
            inst.process_update(op)
        stats[n] = (inst.queue_insertions / len(ops),
                    inst.edge_queries / len(ops))
    log_ratio = math.log2(4096) / math.log2(256)
    query_ratio = ((k + math.log2(4096)) * math.log2(4096)) / (
        (k + math.log2(256)) * math.log2(256))
    assert stats[4096][0] <= max(1.0, stats[256][0]) * 3.0 * log_ratio
    assert stats[4096][1] <= stats[256][1] * 3.0 * query_ratio
