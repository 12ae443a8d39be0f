"""Stability certification toolkit for discrete-time traffic network models.

Builds the nonnegative comparison matrix of a network's error dynamics on
a trapping box and certifies global exponential stability of the
uncongested equilibrium through its spectral radius, with constructive
trapping-box refinement for freeway chains and simulation cross-checks.
"""

from .certify import (
    Certificate,
    certify_freeway,
    certify_linear_comparison,
    certify_network,
    freeway_threshold_certifier,
    parse_certificate,
    serialize_certificate,
    verify_certificate,
)
from .comparison import (
    ComparisonMatrix,
    ComparisonParams,
    build_comparison_freeway,
    build_comparison_general,
    diag_gains,
    freeway_diag_gains,
    optimize_anchors,
    outflow_slopes,
    peak_outflows,
)
from .demand import DisturbedDemand, PiecewiseLinearDemand, lipschitz_constant, outflow_slope
from .model import (
    DisturbanceBox,
    Equilibrium,
    FreewaySpec,
    NetworkSpec,
    ValidatedNetwork,
    equilibrium,
    freeway_equilibrium,
    freeway_step,
    freeway_to_network,
    step,
    step_internals,
    validate_network,
)
from .simulate import (
    DecayEstimate,
    Trajectory,
    check_lyapunov_inequality,
    estimate_decay,
    make_rng,
    simulate,
    sweep_parameter,
    trajectory_to_csv,
)
from .spectral import (
    best_epsilon_refined_bound,
    epsilon_refined_bound,
    row_sum_bound,
    spectral_radius,
    spectral_radius_detailed,
    tridiagonal_toeplitz_radius,
)
from .trapping import (
    Box,
    TrapReport,
    TrapVerification,
    freeway_trapping_box,
    raise_lower,
    shrink_upper,
    verify_trap_empirically,
)

__version__ = "0.1.0"
