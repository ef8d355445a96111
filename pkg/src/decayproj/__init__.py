"""Decay bounds and density matrices for banded and sparse Hermitian matrices."""
from .errors import ConvergenceError, DecayProjError, NotSPDError, PreconditionError
from .matrix import (
    AffineMap,
    GraphDistance,
    SparseHermitian,
    SpectralModel,
    graph_distances,
    norms,
    normalize,
    spectral_interval,
    truncate_band,
    truncate_graph,
)
from .bounds import (
    DecayBound,
    EllipseParam,
    achieser_bound,
    bernstein_fd_bound,
    beta_from_gap,
    chi_bar_fd,
    chui_hasson_bound,
    ellipse_max_fd,
    envelope,
    gap_asymptotics,
    hasson_bound,
    heat_bound,
    prescribe_bandwidth,
    projector_bound,
    resolvent_contour_bound,
    temperature_asymptotics,
)
from .projector import (
    ChebCoeffs,
    DensityResult,
    Pattern,
    cheb_apply,
    cheb_coeffs_fd,
    contour_projector,
    energy,
    energy_error_bounds,
    oracle_fd,
    oracle_projector,
    verify_density,
)
from .orthobasis import (
    FactorSet,
    cholesky_banded,
    congruence,
    demko_constants,
    inverse_cholesky,
    lowdin_inverse_sqrt,
    product_decay_check,
)
from .models import (
    ModelSpec,
    gapped_random,
    kron_2d,
    synthetic_decay,
    toeplitz_1d,
    toeplitz_fd_limit,
    toeplitz_projector_exact,
    toeplitz_projector_limit,
)

__version__ = "0.1.0"
