"""Anchor-free graph embedding by sequential lateration, classical scaling and stress minimization."""

from .embedders import ScalingOutput, classical_lateration, classical_scaling
from .errors import (
    DegenerateLandmarksError,
    DegenerateStepError,
    InvalidInputError,
    NotLaterableError,
    NumericalFailureError,
    ScenarioInfeasibleError,
    SeqlatError,
)
from .estimators import ClassicalScaling, SequentialLateration, StressMDS
from .geometry import (
    Configuration,
    RigidTransform,
    ShapeStats,
    embedding_error,
    in_general_position,
    pairwise_sq_dists,
    procrustes_align,
    shape_stats,
)
from .graph import (
    DissimilarityGraph,
    DomainSpec,
    LaterativeOrdering,
    NoiseSpec,
    apply_noise,
    find_laterative_ordering,
    geometric_graph,
    is_laterative_ordering,
    sample_domain,
)
from .sequential import (
    EmbeddingResult,
    TheoryBound,
    sequential_laterate_best,
    sequential_laterate_first,
    theory_bound,
    verify_perturbation_bound,
)
from .stress import (
    OptimizerConfig,
    ScalingInstance,
    make_scaling_instance,
    minimize_gd,
    minimize_smacof,
    s_stress,
    s_stress_gradient,
)

__version__ = "0.1.0"
