"""Structured prediction over discourse factor graphs.

Trains per-factor scorers with the structured hinge loss and compares exact
constrained MAP inference against restart-based randomized greedy search,
with a benchmark harness for timing and restart sweeps.
"""

from .constraints import (
    ConstraintSet,
    Rule,
    Violation,
    check,
    propagate_stance_edges,
    sample_valid_labeling,
)
from .corpus import (
    SyntheticSpec,
    generate_synthetic,
    load_corpus,
    save_corpus,
)
from .errors import (
    ConstraintError,
    DataFormatError,
    GraphStructureError,
    InfeasibleError,
    SizeBudgetError,
    StructuraError,
)
from .exact import Augment, ExactConfig, exact_map
from .graphs import (
    AgreementLabel,
    ArgMiningMeta,
    Assignment,
    Factor,
    FactorGraph,
    FactorType,
    LinkLabel,
    NodeLabel,
    StanceLabel,
    StanceMeta,
    Task,
    Variable,
    VarKind,
    active_factors,
    enumerate_assignments,
    hamming_distance,
)
from .harness import bench_inference, sweep_restarts
from .randomized import (
    HillClimbState,
    RandConfig,
    hill_climb,
    local_update_moves,
    randomized_inference_argmining,
    randomized_inference_stance,
    sample_random_tree,
)
from .results import InferenceResult, Telemetry
from .scoring import (
    GradientBank,
    HammingMode,
    ScoreBreakdown,
    ScorerBank,
    augmented_score,
    hinge_gradient,
    hinge_loss,
    param_norm,
    score_factor,
    score_graph,
    sgd_step,
)
from .training import (
    Backend,
    Corpus,
    MetricsReport,
    Split,
    TrainConfig,
    TrainResult,
    evaluate,
    train_local,
    train_structured,
)

__version__ = "0.1.0"
