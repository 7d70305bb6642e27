"""Fully dynamic metric clustering under point insertions and deletions.

Engines: LFMIS-based (2+eps)-approximate k-center, its LSH-accelerated
variant for hashable metrics, a deterministic clustering-tree k-center that
works against metric-adaptive adversaries, and a primal-dual
k-sum-of-radii/diameters solver. A metric-adaptive adversary harness and
brute-force reference oracles back the test suite.
"""

from .adversary import (
    AdversaryState,
    ConsistentMetric,
    DiameterReporter,
    PlantedInstance,
    generate_planted,
    run_gauntlet,
)
from .errors import (
    BudgetExceeded,
    CapacityExceeded,
    DeleteOfInactive,
    DuplicateInsert,
    DynClustError,
    Infeasible,
    MalformedStream,
    NotCleanOperation,
    RadiusOutOfRange,
    UnknownPoint,
    UnsupportedKind,
)
from .kcenter import KCenterEngine, KCenterSolution, RestartWrapper
from .lfmis import LfmisInstance, eliminator_oracle, rank_value
from .lsh import (
    BitSampleFamily,
    LshIndex,
    LshKCenterEngine,
    LshParams,
    MinHashFamily,
    PStableFamily,
    sample_family,
)
from .metric import (
    DELETE,
    INSERT,
    CallableOracle,
    DistanceOracle,
    EuclideanOracle,
    HammingOracle,
    JaccardOracle,
    LpOracle,
    MatrixOracle,
    ScaleLadder,
    StreamStats,
    UpdateOp,
    apply_update,
    delete,
    derive_seed,
    insert,
    make_oracle,
    parse_stream,
    write_stream,
)
from .oracles import (
    OracleBudget,
    exact_kcenter,
    exact_sum_radii,
    greedy_lfmis,
    threshold_adjacency,
)
from .sumradii import PdGuess, SumRadiiEngine, SumRadiiSolution, combine, offline_solve
from .tree import DetTreeEngine, GuessTree, TreeNode, node_delete, node_insert, try_make_center

__version__ = "0.1.0"
