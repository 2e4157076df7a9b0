"""Disparate-impact audits for differentially private post-processing.

Quantifies how restoring data invariants (non-negativity, public totals)
after noise injection biases entities unevenly, both in data release and in
downstream proportional fund allocation, with reproducible Monte-Carlo
audits and closed-form fairness bounds.
"""

from .allocation import (
    AllocationMechanism,
    AllocationProblem,
    AllocationReport,
    DegenerateSampleError,
    MechanismComparison,
    allocation_audit,
    compare_mechanisms,
    l1_objective_check,
    mechanism_bl,
    mechanism_pos,
    noisy_allocation,
    synthetic_districts,
    true_allocation,
)
from .core import (
    StreamSeed,
    TrialStreams,
    TrueDataset,
    negative_part,
    positive_part,
    range_norm,
)
from .estimators import (
    BaselineAllocator,
    GaussianNoiser,
    LaplaceNoiser,
    SimplexAllocator,
    SimplexProjector,
    SumProjector,
)
from .fixtures import hawaii_households
from .mechanisms import Budget, NoiseKind, NoiseSpec, sample_noisy, scale_from_budget
from .projection import (
    AffineConstraint,
    ProjectionResult,
    RankDeficientConstraintError,
    project_affine,
    project_sum,
    project_sum_nonneg,
    solve_threshold,
    threshold_upper_bound,
)
from .release_audit import (
    BiasDifferenceReport,
    BiasReport,
    BoundsMethod,
    BoundsReport,
    PostProcess,
    bias_difference_checks,
    bounds_empirical,
    bounds_gaussian,
    estimate_bias,
)

__version__ = "0.1.0"

__all__ = [
    "AffineConstraint",
    "AllocationMechanism",
    "AllocationProblem",
    "AllocationReport",
    "BaselineAllocator",
    "BiasDifferenceReport",
    "BiasReport",
    "BoundsMethod",
    "BoundsReport",
    "Budget",
    "DegenerateSampleError",
    "GaussianNoiser",
    "LaplaceNoiser",
    "MechanismComparison",
    "NoiseKind",
    "NoiseSpec",
    "PostProcess",
    "ProjectionResult",
    "RankDeficientConstraintError",
    "SimplexAllocator",
    "SimplexProjector",
    "StreamSeed",
    "SumProjector",
    "TrialStreams",
    "TrueDataset",
    "allocation_audit",
    "bias_difference_checks",
    "bounds_empirical",
    "bounds_gaussian",
    "compare_mechanisms",
    "estimate_bias",
    "hawaii_households",
    "l1_objective_check",
    "mechanism_bl",
    "mechanism_pos",
    "negative_part",
    "noisy_allocation",
    "positive_part",
    "project_affine",
    "project_sum",
    "project_sum_nonneg",
    "range_norm",
    "sample_noisy",
    "scale_from_budget",
    "solve_threshold",
    "synthetic_districts",
    "threshold_upper_bound",
    "true_allocation",
]
