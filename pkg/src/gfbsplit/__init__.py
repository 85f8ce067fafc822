"""Generalized forward-backward splitting with rate certification.

Solves composite objectives ``f + sum_i h_i`` (smooth gradient plus
simple prox-friendly terms) by a relaxed, optionally inexact splitting
iteration over a weighted product space, and certifies the observed
fixed-point and first-order residuals against predicted pointwise and
ergodic bound curves.  Includes a principal-component-pursuit demo
problem and a batch CLI.
"""

from .space import (
    Block,
    ProductPoint,
    Weights,
    lift,
    project_diagonal,
    reflect_diagonal,
    weighted_block_sum,
    weighted_inner,
    weighted_norm,
)
from .operators import (
    DenseMatrix,
    OracleDivergence,
    ProxOracle,
    SmoothOracle,
    box_prox_oracle,
    check_prox_oracle,
    l1_prox_oracle,
    moreau_env_value_grad,
    nonneg_prox_oracle,
    nuclear_norm,
    nuclear_prox_oracle,
    project_nonneg,
    prox_nuclear,
    prox_scaled_l1,
    svd,
)
from .gfb import (
    ConfigError,
    ErrorSchedule,
    GfbConfig,
    IterationTrace,
    NumericalFailure,
    SolverState,
    SplitProblem,
    ValidatedConfig,
    apply_T,
    certificate_g,
    ergodic_read,
    gfb_iterate,
    initial_state,
    residual_e,
    run,
    validate_config,
)
from .rates import (
    BoundViolation,
    RateReport,
    alpha_of,
    compute_constants,
    ergodic_bound_curve,
    estimate_fixed_point,
    pointwise_bound_curve,
    tau_of,
    verify_bounds,
)
from .pcp import (
    PcpInstance,
    PcpParams,
    build_problem,
    evaluate_objective,
    recover_sparse,
    resolve_mus,
    synth_instance,
)

__version__ = "0.1.0"
