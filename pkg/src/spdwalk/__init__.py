"""Random walks on the cone of symmetric positive definite matrices.

Wishart-driven composition walks, their distance functionals, explicit tail
bounds, a Hoffmann-Jorgensen inequality evaluator, and a Monte Carlo
verification harness.
"""

from .spd import (
    EigenSolverError,
    SpdConstructionError,
    compose,
    dist_from_identity,
    inv_sqrt,
    make_spd,
    matrix_from_csv,
    matrix_from_json,
    matrix_sqrt,
    matrix_to_csv,
    matrix_to_json,
    riemannian_distance,
    sym_eigenvalues,
    thompson_distance,
)
from .sampling import (
    RngStream,
    WalkPath,
    WalkStats,
    WalkStatsBatch,
    WishartParams,
    generate_walk,
    haar_orthogonal,
    sample_stats_batch,
    sample_walk_batch,
    walk_statistics,
    wishart_sample,
)
from .special import (
    DomainError,
    KrishnaiahChangTable,
    QuadratureError,
    band_probability,
    build_kc_table,
    f_double,
    f_single,
    log_k_integral,
    log_norm_const,
    log_selberg_integral,
    multivariate_gamma_ln,
    pfaffian_abs,
    reg_gamma_lower,
)
from .bounds import (
    BoundReport,
    ChernoffEval,
    chernoff_eval,
    chernoff_objective,
    minimize_over_D,
    step_max_tail_bound,
    walk_max_cdf_bound,
    walk_max_tail_bound,
    walk_max_tail_bound_geometric,
)
from .hj import (
    HjConfig,
    HjResult,
    ProbInputs,
    certified_hj_bound,
    hj_index_membership,
    hj_rhs,
    hj_threshold,
    strengthened_m_term,
)
from .mc import (
    KsResult,
    TailEstimate,
    domination_suite,
    estimate_probability,
    invariance_suite,
    ks_two_sample,
    martingale_suite,
    wilson_interval,
)

__version__ = "0.1.0"
