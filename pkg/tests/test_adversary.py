"""Metric-adaptive adversary: consistency, invariants, planted instances."""

import itertools
import random

import pytest

from dynclust.adversary import (
    CLOSED,
    OFF,
    OPEN,
    AdversaryState,
    DiameterReporter,
    generate_planted,
    run_gauntlet,
)
from dynclust.errors import BudgetExceeded, NotCleanOperation, UnknownPoint
from dynclust.metric import DELETE, INSERT
from dynclust.oracles import exact_kcenter


def test_first_update_is_insert():
    state = AdversaryState(k=1, f=4)
    op = state.generate_update()
    assert op.kind == INSERT and state.label[op.id] == OPEN


def test_open_open_answer_is_one_and_recorded():
    state = AdversaryState(k=1, f=4)
    a = state.generate_update().id
    b = state.generate_update().id
    assert state.answer_query(a, b) == 1
    assert b in state.graph[a]
    # repeated query returns the same value without another edge
    edges_before = sum(len(adj) for adj in state.graph.values())
    assert state.answer_query(a, b) == 1
    assert sum(len(adj) for adj in state.graph.values()) == edges_before


def test_zero_query_algorithm_sees_pure_insertions():
    state = AdversaryState(k=2, f=4)
    ops = [state.generate_update() for _ in range(50)]
    assert all(op.kind == INSERT for op in ops)  # no degrees ever grow


def test_unknown_point_query_raises():
    state = AdversaryState(k=1, f=4)
    a = state.generate_update().id
    with pytest.raises(UnknownPoint):
        state.answer_query(a, 999)


def test_closed_vertex_gets_deleted_next():
    state = AdversaryState(k=1, f=0.05)  # degree threshold 100f = 5
    ids = [state.generate_update().id for _ in range(8)]
    hub = ids[0]
    for other in ids[1:6]:
        state.answer_query(hub, other)
    assert state.label[hub] == CLOSED
    op = state.generate_update()
    assert op.kind == DELETE and op.id == hub
    assert state.label[hub] == OFF


def test_deleted_points_still_answerable():
    state = AdversaryState(k=1, f=0.05)
    ids = [state.generate_update().id for _ in range(8)]
    hub = ids[0]
    for other in ids[1:6]:
        state.answer_query(hub, other)
    state.generate_update()  # deletes the hub
    d = state.answer_query(hub, ids[1])
    assert d == 1  # recorded edge persists for the off vertex


def test_off_vertex_answer_routes_through_open_clique():
    state = AdversaryState(k=1, f=0.05)
    ids = [state.generate_update().id for _ in range(8)]
    hub = ids[0]
    for other in ids[1:6]:
        state.answer_query(hub, other)
    state.generate_update()  # hub closed -> deleted
    fresh = state.generate_update().id  # new open vertex, no edges
    # hub reaches an open neighbor in one hop, then one virtual edge to fresh
    assert state.answer_query(hub, fresh) == 2


def test_materialize_requires_clean():
    state = AdversaryState(k=1, f=0.05)
    ids = [state.generate_update().id for _ in range(8)]
    for other in ids[1:6]:
        state.answer_query(ids[0], other)
    assert not state.is_clean
    with pytest.raises(NotCleanOperation):
        state.materialize_metric("M_uni")


def _drive(state, ops, queries_per_op, seed):
    rng = random.Random(seed)
    active = []
    for _ in range(ops):
        op = state.generate_update()
        if op.kind == INSERT:
            active.append(op.id)
        else:
            active.remove(op.id)
        for _ in range(queries_per_op):
            if len(active) >= 2:
                state.answer_query(*rng.sample(active, 2))
    return active


def test_consistency_and_invariants_over_random_run():
    # budget f = 0.2/op (closure threshold 100f = 20 edges); the driver stays
    # inside the cumulative budget but aims most queries at one hub so that
    # closures and deletions actually happen
    f = 0.2
    state = AdversaryState(k=2, f=f)
    rng = random.Random(3)
    active: list[int] = []
    hub = None
    allowance = 0.0
    spent = 0
    clean_ts = []
    for _ in range(600):
        allowance += f
        op = state.generate_update()
        if op.kind == INSERT:
            active.append(op.id)
            if hub is None:
                hub = op.id
        else:
            active.remove(op.id)
            if op.id == hub:
                hub = active[0] if active else None
        while spent + 1 <= allowance and len(active) >= 2:
            if hub in active and rng.random() < 0.8:
                other = rng.choice([v for v in active if v != hub])
                state.answer_query(hub, other)
            else:
                state.answer_query(*rng.sample(active, 2))
            spent += 1
        assert state.open_count * 100 >= 92 * state.t
        for v in state.graph:
            assert len(state.graph[v]) <= 100 * state.f(2, state.t) + 1
        if state.is_clean:
            clean_ts.append(state.t)
            uni = state.materialize_metric("M_uni")
            star = state.materialize_metric("M_star")
            assert uni.report == []
            assert star.report == []
    assert any(lab == OFF for lab in state.label.values()), "no closure happened"
    # a clean operation exists in every (t, 2t]
    for t in range(1, state.t // 2 + 1):
        assert any(t < tc <= 2 * t for tc in clean_ts), f"no clean op in ({t}, {2*t}]"


def test_range_and_multi_metrics_consistent():
    state = AdversaryState(k=1, f=4)
    active = _drive(state, 120, 3, seed=5)
    assert state.is_clean or any(
        state.generate_update() or state.is_clean for _ in range(240)
    )
    if not state.is_clean:
        pytest.skip("no clean op reached")
    rng_metric = state.materialize_metric("M_range", l1=1, l2=4)
    assert rng_metric.report == []
    opens = state.open_vertices()
    multi = state.materialize_metric("M_multi", p_set=opens[:2], ell=2)
    assert multi.report == []


def test_star_metric_layering_reported():
    state = AdversaryState(k=1, f=4)
    _drive(state, 200, 2, seed=7)
    if not state.is_clean:
        pytest.skip("not clean here")
    star = state.materialize_metric("M_star")
    gap = star.max_open_distance()
    assert gap >= 1.0
    # triangle inequality of the materialized formula metric on open pairs
    opens = state.open_vertices()[:12]
    for x, y, z in itertools.combinations(opens, 3):
        assert star.open_distance(x, z) <= (
            star.open_distance(x, y) + star.open_distance(y, z)
        )


class _GreedyAllPairs:
    """Deliberately over-budget algorithm: queries every pair each update."""

    def __init__(self):
        self.active = []

    def process(self, op, query):
        if op.kind == INSERT:
            self.active.append(op.id)
        else:
            self.active.remove(op.id)
        for a, b in itertools.combinations(self.active, 2):
            query(a, b)

    def solution(self):
        return {"diameter": 1}


def test_budget_enforced():
    with pytest.raises(BudgetExceeded):
        run_gauntlet(_GreedyAllPairs(), k=1, f=2, ops=40)


def test_gauntlet_with_diameter_reporter():
    result = run_gauntlet(DiameterReporter(queries_per_op=4, seed=1),
                           k=1, f=4, ops=200)
    assert result["records"][-1]["t"] == 200
    assert all(r["open_fraction"] >= 0.92 for r in result["records"])
    assert result["clean_records"], "expected clean operations"
    for rec in result["clean_records"]:
        assert rec["uni_mismatches"] == 0
        assert rec["star_mismatches"] == 0
    assert result["clean_records"][-1]["gap"] >= 1.0


def test_planted_instance_properties():
    inst = generate_planted(14, 2, 10.0, seed=4)
    oracle = inst.oracle()
    ids = list(range(14))
    for i in ids:
        oracle.add_point(i)
    # triangle inequality audited exhaustively
    for x, y, z in itertools.combinations(ids, 3):
        assert oracle.raw_distance(x, z) <= (
            oracle.raw_distance(x, y) + oracle.raw_distance(y, z) + 1e-12
        )
    kind, bound = inst.opt_bound()
    opt, _ = exact_kcenter(ids, oracle.raw_distance, 2)
    if kind == "upper":
        assert opt <= bound + 1e-12
    elif kind == "lower":
        assert opt >= bound - 1e-12


def test_planted_requires_headroom():
    with pytest.raises(ValueError):
        generate_planted(3, 2, 10.0)
    with pytest.raises(ValueError):
        generate_planted(10, 2, 1.0)
