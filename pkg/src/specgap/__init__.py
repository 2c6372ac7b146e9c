"""Certified spectral gap detection with Lanczos quadrature.

A Gaussian vector ``x`` turns the eigenvalue counting function into the
staircase ``mu -> x^T P_mu x``.  Flat stretches of a certified envelope
around its Lanczos approximation mark intervals free of eigenvalues.
"""

from .bounds import (
    AprioriParams,
    BoundCurves,
    ClusteredRitzValuesError,
    apriori_bound,
    aposteriori_bounds,
    combine_over_M,
    consec_diff_estimate,
    epsilon_for_samples,
    epsilon_from_delta,
    required_iterations,
    sample_count,
    small_jump_prob_bound,
)
from .estimator import MuGrid, QuadFormCurve, hutchinson_average, make_grid, quadform_curve
from .gapfinder import (
    Gap,
    GapFinderConfig,
    GapReport,
    estimate_eigcount_below,
    find_gaps,
    relative_gap_width,
    run_pipeline,
)
from .lanczos import LanczosBreakdownError, LanczosDecomposition, lanczos_run
from .problems import (
    example_three_gaps,
    exact_gaps,
    gen_dirac_comb,
    gen_perturbed_logspace,
    gen_planted_spectrum,
    shift_scale,
)
from .sparse import (
    MatrixFormatError,
    SparseSymMatrix,
    SpectralInterval,
    load_matrix_market,
    spectral_interval,
    write_matrix_market,
)
from .trideig import TridiagEigen, bisection_eigenvalues, sturm_count, tridiag_eigen

__version__ = "0.1.0"
