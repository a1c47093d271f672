"""Optimal purity-increasing control of dissipative quantum systems.

Under complete and instantaneous unitary control the state of an N-level
system with spontaneous emission is summarized by its eigenvalue spectrum,
which moves under a doubly-stochastic image of the applied unitary.  This
package provides the full-matrix dynamics, the spectrum-level reduction, the
closed-form optimal cooling strategy for the three-level Lambda system, and
the dynamic-programming machinery that certifies its global optimality.
"""

from .density import (
    DensityMatrix,
    MajorizationOrder,
    Spectrum,
    Tolerances,
    as_spectrum,
    entropy_vn,
    majorizes,
    purity_largest,
    purity_tr2,
    sort_descending,
    spectrum,
    validate,
)
from .errors import (
    DegenerateInput,
    DimensionMismatch,
    DomainViolation,
    EigensolverFailure,
    GridUnderflow,
    InvariantViolation,
    LaserCoolError,
    NegativeEigenvalue,
    NotDoublyStochastic,
    NotHermitian,
    NotUnitary,
    TraceDeviation,
)
from .hjb import (
    ActionSetConfig,
    ArgmaxReport,
    F,
    F_restricted,
    ObjectiveContext,
    SamplerConfig,
    ValueTable,
    argmax_F,
    boundary_slopes,
    candidate_controls,
    coherence_exchange_check,
    dp_solve,
    hessian_G,
    hessian_det_terms,
    ordered_simplex_grid,
    restricted_theta,
)
from .lambda_system import (
    GradientCheckReport,
    LambdaSystem,
    Regime,
    RegimeReport,
    equalization_time,
    greedy_policy,
    lambda2_at_tau_star,
    mu,
    mu_gradient_check,
    regime_report,
    return_function,
    return_function_tau_derivative,
    tau_star,
)
from .lindblad import (
    ControlSchedule,
    RateMatrix,
    apply_unitary,
    default_step,
    dissipator,
    haar_unitary,
    propagate,
    unitarity_defect,
)
from .spectral import (
    DoublyStochastic,
    SpectralGenerator,
    build_generator,
    sample_birkhoff,
    sample_unistochastic,
    spectral_propagate,
    spectral_rhs,
    spectral_rhs_oracle,
    theta_compose_D,
    theta_from_unitary,
    transition_matrix,
)

__version__ = "0.1.0"
