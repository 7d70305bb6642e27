"""Command-line driver: stream runs with telemetry, benchmarks, gauntlet.

``run`` replays a stream file through one engine and emits one JSON object
per update; an independent verifier recomputes the realized cost from the
emitted centers and fails the run on any mismatch. ``bench`` measures
query/queue traffic on synthetic streams and renders a scaling figure next
to the CSV. ``gauntlet`` drives an algorithm through the metric-adaptive
adversary under a query budget.
"""

from __future__ import annotations

import argparse
import json
import math
import random
import sys
from pathlib import Path

from . import report as report_mod
from .adversary import DiameterReporter, run_gauntlet
from .errors import DynClustError
from .kcenter import KCenterEngine, threads_from_env
from .lsh import LshKCenterEngine
from .metric import (
    DELETE,
    INSERT,
    CallableOracle,
    EuclideanOracle,
    UpdateOp,
    coordinate_bounds,
    parse_stream,
)
from .sumradii import SumRadiiEngine
from .tree import DetTreeEngine

ALGOS = ("lfmis-kcenter", "lsh-kcenter", "det-tree", "sum-radii", "sum-diam")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dynclust",
                                     description="fully dynamic metric clustering")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="replay a stream file with telemetry")
    run_p.add_argument("--algo", choices=ALGOS, required=True)
    run_p.add_argument("--input", required=True)
    run_p.add_argument("--output", default="-", help="JSONL path or - for stdout")
    run_p.add_argument("--k", type=int, default=2)
    run_p.add_argument("--eps", type=float, default=0.5)
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--delta", type=float, default=None,
                       help="failure probability (lsh-kcenter only)")
    run_p.add_argument("--c", type=float, default=None,
                       help="LSH approximation factor (lsh-kcenter only)")
    run_p.add_argument("--B", type=int, default=None,
                       help="tree branching factor (det-tree only)")
    run_p.add_argument("--r-min", type=float, default=None)
    run_p.add_argument("--r-max", type=float, default=None)

    bench_p = sub.add_parser("bench", help="synthetic scaling benchmark")
    bench_p.add_argument("--algo", choices=("lfmis-kcenter",), default="lfmis-kcenter")
    bench_p.add_argument("--sizes", default="256,1024,4096")
    bench_p.add_argument("--k", type=int, default=8)
    bench_p.add_argument("--eps", type=float, default=1.0)
    bench_p.add_argument("--seed", type=int, default=0)
    bench_p.add_argument("--out", default="bench-out",
                         help="output directory for csv/jsonl/figure")

    g_p = sub.add_parser("gauntlet", help="adversarial stress run")
    g_p.add_argument("--algo", choices=("diameter-reporter", "det-tree"),
                     default="diameter-reporter")
    g_p.add_argument("--budget-f", default="4",
                     help="query budget per op: constant or expression in k, n")
    g_p.add_argument("--ops", type=int, default=512)
    g_p.add_argument("--k", type=int, default=1)
    g_p.add_argument("--seed", type=int, default=0)
    g_p.add_argument("--output", default="-", help="JSONL of clean-op reports")
    g_p.add_argument("--plot", default=None, help="optional figure path (.png)")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "bench":
            return cmd_bench(args)
        return cmd_gauntlet(args)
    except DynClustError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def _validate_run_flags(args) -> None:
    if args.algo != "lsh-kcenter" and (args.c is not None or args.delta is not None):
        raise DynClustError("--c/--delta are only valid with --algo lsh-kcenter")
    if args.algo != "det-tree" and args.B is not None:
        raise DynClustError("--B is only valid with --algo det-tree")


def _auto_scale(oracle, ops, limit: int = 2048) -> tuple[float, float]:
    ids = []
    for op in ops:
        if op.kind == INSERT:
            oracle.add_point(op.id, op.coords)
            ids.append(op.id)
    if len(ids) > limit:
        # exact pairwise scan is quadratic; fall back to coordinate-box bounds
        bounds = coordinate_bounds(ops)
        if bounds is None:
            raise DynClustError(
                f"auto scale scan limited to {limit} points for this metric; "
                "pass --r-min/--r-max"
            )
        return bounds
    lo, hi = math.inf, 0.0
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            d = oracle.raw_distance(a, b)
            if d > 0:
                lo = min(lo, d)
            hi = max(hi, d)
    if not ids or hi == 0.0:
        return 1.0, 1.0
    if math.isinf(lo):
        lo = hi
    return lo, hi


def cmd_run(args) -> int:
    _validate_run_flags(args)
    oracle, ops = parse_stream(args.input)
    if args.r_min is None or args.r_max is None:
        scan_oracle, _ = parse_stream(args.input)
        r_min, r_max = _auto_scale(scan_oracle, ops)
        r_min = args.r_min if args.r_min is not None else r_min
        r_max = args.r_max if args.r_max is not None else r_max
    else:
        r_min, r_max = args.r_min, args.r_max
    engine = _build_engine(args, oracle, r_min, r_max)

    sink = sys.stdout if args.output == "-" else open(args.output, "w")
    code = 0
    try:
        for t, op in enumerate(ops, start=1):
            before = oracle.query_counter
            solution = engine.update(op)
            line = _telemetry(args.algo, engine, oracle, solution, t, before)
            if line is None:
                print(f"error: telemetry verification failed at update {t}",
                      file=sys.stderr)
                code = 2
                break
            sink.write(json.dumps(line) + "\n")
    finally:
        if sink is not sys.stdout:
            sink.close()
    return code


def _build_engine(args, oracle, r_min, r_max):
    threads = threads_from_env()
    if args.algo == "lfmis-kcenter":
        return KCenterEngine(oracle, args.k, args.eps, r_min, r_max,
                             seed=args.seed, threads=threads)
    if args.algo == "lsh-kcenter":
        c = args.c if args.c is not None else 2.0
        delta = args.delta if args.delta is not None else 0.1
        dim = getattr(oracle, "declared_dim", None)
        return LshKCenterEngine(oracle, args.k, args.eps, c, delta,
                                r_min, r_max, seed=args.seed, dim=dim)
    if args.algo == "det-tree":
        return DetTreeEngine(oracle, args.k, args.eps, r_min, r_max, B=args.B)
    return SumRadiiEngine(oracle, args.k, args.eps, r_min, r_max, seed=args.seed)


def _telemetry(algo, engine, oracle, solution, t, queries_before):
    """One JSON record per update; None signals a verification mismatch."""
    queries_delta = oracle.query_counter - queries_before
    if algo in ("lfmis-kcenter", "lsh-kcenter"):
        realized = engine.realized_cost()
        estimate = solution.cost_estimate
        centers = solution.num_centers
        restarts = (engine.epoch - 1) if algo == "lsh-kcenter" else engine.restarts
        witness = 0
    elif algo == "det-tree":
        realized = engine.realized_cost()
        estimate = solution.cost_estimate
        centers = solution.num_centers
        restarts = 0
        witness = engine.witness_count()
    else:  # sum-radii / sum-diam
        if algo == "sum-diam":
            solution = solution.diameters_view()
        realized = _sum_realized(algo, engine, solution)
        estimate = solution.cost
        centers = solution.num_centers
        restarts = 0
        witness = 0
    if realized > estimate + 1e-9:
        return None
    return {
        "t": t,
        "n_active": engine.stats.n_active,
        "cost_estimate": estimate,
        "realized_cost": realized,
        "num_centers": centers,
        "distance_queries_delta": queries_delta,
        "restarts": restarts,
        "witness_flags": witness,
    }


def _sum_realized(algo, engine, solution) -> float:
    """Realized sum of radii (or diameters) from the reported clusters."""
    if not engine.stats.active or solution.opt_prime is None:
        return 0.0
    assignment = engine.assignment(solution)  # cluster radii are shared by both views
    members: dict = {}
    for p, c in assignment.items():
        members.setdefault(c, []).append(p)
    total = 0.0
    for c, _r in solution.clusters:
        pts = members.get(c, [])
        if not pts:
            continue
        if algo == "sum-radii":
            total += max(engine.oracle.raw_distance(p, c) for p in pts)
        else:
            total += max(
                engine.oracle.raw_distance(a, b)
                for a in pts for b in pts
            )
    return total


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

def synthetic_stream(n: int, seed: int):
    """n uniform inserts in the unit square followed by n churn updates."""
    rng = random.Random(seed)
    ops = []
    alive = []
    counter = 0
    for _ in range(n):
        pid = f"p{counter}"
        counter += 1
        ops.append(UpdateOp(INSERT, pid, (rng.random(), rng.random())))
        alive.append(pid)
    for i in range(n):
        if i % 2 == 0 and alive:
            victim = alive.pop(rng.randrange(len(alive)))
            ops.append(UpdateOp(DELETE, victim))
        else:
            pid = f"p{counter}"
            counter += 1
            ops.append(UpdateOp(INSERT, pid, (rng.random(), rng.random())))
            alive.append(pid)
    return ops


def bench_once(n: int, k: int, eps: float, seed: int) -> dict:
    """Run one synthetic stream and report mean per-update traffic."""
    oracle = EuclideanOracle()
    # fixed ladder across sizes so the aspect ratio term is constant
    engine = KCenterEngine(oracle, k, eps, r_min=1e-3, r_max=1.5, seed=seed)
    ops = synthetic_stream(n, seed)
    for op in ops:
        engine.update(op)
    updates = max(1, len(ops))
    queue_ins = sum(engine._instance(i).queue_insertions
                    for i in range(len(engine.scales)))
    return {
        "n": n,
        "k": k,
        "eps": eps,
        "seed": seed,
        "updates": len(ops),
        "scales": len(engine.ladder),
        "mean_queries_per_update": oracle.query_counter / updates,
        "mean_queue_insertions_per_update": queue_ins / updates,
    }


def cmd_bench(args) -> int:
    sizes = [int(tok) for tok in args.sizes.split(",") if tok]
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = [bench_once(n, args.k, args.eps, args.seed) for n in sizes]
    csv_path = outdir / "bench.csv"
    with open(csv_path, "w") as fh:
        cols = list(rows[0].keys())
        fh.write(",".join(cols) + "\n")
        for r in rows:
            fh.write(",".join(str(r[c]) for c in cols) + "\n")
    with open(outdir / "bench.jsonl", "w") as fh:
        for r in rows:
            fh.write(json.dumps(r) + "\n")
    fig = report_mod.bench_figure(rows, outdir / "bench.png")
    print(f"wrote {csv_path} and {fig}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# gauntlet
# ---------------------------------------------------------------------------

def parse_budget(expr: str):
    """Budget expression in k and n, e.g. '4' or '2*log(n+1)'."""
    code = compile(expr, "<budget-f>", "eval")
    names = {"log": math.log, "log2": math.log2, "sqrt": math.sqrt,
             "min": min, "max": max, "ceil": math.ceil}

    def f(k, n):
        return float(eval(code, {"__builtins__": {}}, dict(names, k=k, n=n)))

    return f


class DetTreeAdversaryAdapter:
    """Runs the deterministic tree against the adversary's answer oracle."""

    name = "det-tree"

    def __init__(self, k: int, eps: float, ops: int, B: int | None = None):
        self._query = None
        oracle = CallableOracle(lambda a, b: self._query(a, b))
        # adversary distances are integers in [1, ops]
        self.engine = DetTreeEngine(oracle, k, eps, r_min=1.0,
                                    r_max=float(max(2, ops)), B=B, n_hint=ops)

    def process(self, op: UpdateOp, query) -> None:
        self._query = query
        if op.kind == INSERT:
            self.engine.oracle.add_point(op.id, None)
        self.engine.update(op)

    def solution(self):
        return list(self.engine.report().centers)


def cmd_gauntlet(args) -> int:
    f = parse_budget(args.budget_f)
    if args.algo == "diameter-reporter":
        per_op = max(1, int(f(args.k, 1)))
        algo = DiameterReporter(queries_per_op=per_op, seed=args.seed)
    else:
        algo = DetTreeAdversaryAdapter(args.k, eps=0.5, ops=args.ops)
    result = run_gauntlet(algo, args.k, f, args.ops)
    sink = sys.stdout if args.output == "-" else open(args.output, "w")
    try:
        for rec in result["clean_records"]:
            sink.write(json.dumps(rec) + "\n")
    finally:
        if sink is not sys.stdout:
            sink.close()
    if args.plot:
        report_mod.gauntlet_figure(result["clean_records"], args.plot)
    bad = [r for r in result["records"] if r["open_fraction"] < 0.92]
    mismatches = sum(r["uni_mismatches"] + r["star_mismatches"]
                     for r in result["clean_records"])
    if bad or mismatches:
        print(f"error: adversary invariants violated "
              f"({len(bad)} open-fraction, {mismatches} answer mismatches)",
              file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
