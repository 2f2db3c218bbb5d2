"""Variation pattern classification for functional data.

Classifies curves whose groups share a mean by comparing lagged
(auto-)covariance operators in a data-adaptively chosen discriminative
eigenbasis.
"""

__version__ = "0.1.0"

from .errors import (
    DegenerateCurveError,
    DegenerateLagError,
    IncompatibleGridsError,
    InsufficientSampleError,
    NoDiscrepancyError,
    NotSymmetricError,
    UntrainableModelError,
    VpcError,
)
from .funcgrid import (
    BasisSet,
    Curve,
    CurvePanel,
    Grid,
    bandpass_project,
    bspline_basis,
    concat_channels,
    fourier_basis,
    inner_product,
    l2_norm,
    make_uniform_grid,
    scale_to_unit,
)
from .operators import (
    EigenSystem,
    KernelOperator,
    eigendecompose,
    empirical_y_operator,
    estimate_lagged_cov,
    hs_norm,
    rank_one,
    symmetrized_lagged_cov,
)
from .classifier import (
    CvReport,
    DiscriminativeBasis,
    LagComponent,
    MulticlassVpcModel,
    VpcModel,
    amplitude_prefilter,
    classify,
    classify_multiclass,
    classify_pipeline,
    discriminative_basis,
    lag_weight,
    score_matrix,
    select_dim,
    single_lag_rate,
    train,
    train_multiclass,
    tune,
    tune_tau,
)
from .segmented import BreakReport, SegmentRegistry, build_registry, classify_with_segments, detect_breaks
from .simgen import (
    FmaSpec,
    make_fma_spec,
    simulate_bspline_scores,
    simulate_fma,
    simulate_fourier_settings,
)
