"""Stability of radial solutions of ``-Lap u = f(u)`` in R^N.

Regular radial profiles are computed by shooting from the origin; stability
is decided by intersection witnesses (instability) or Hardy-type barrier
certificates (stability), and the global picture is classified as type I,
II or III.
"""

from ._jit import JIT_ENABLED
from .errors import (
    AccuracyError,
    ConsistencyError,
    DomainError,
    HypothesisError,
    PreconditionError,
    RadstabError,
    RangeError,
    StiffnessError,
)
from .nonlinearity import (
    NonlinearitySpec,
    check_hypotheses,
    critical_exponents,
    curvature_ratio,
    custom,
    estimate_limits,
    eval_derivatives,
    eval_F,
    power_sum_from_q,
    from_config,
    hardy_gate,
    invert_F,
    power,
    power_rational,
    power_sum,
    q_of,
)
from .radial_ode import (
    SolverConfig,
    solve_ivp,
    solve_linearized,
    solve_pair,
    verify_F_lower_bound,
    verify_mass_identity,
)
from .scaling import (
    convergence_study,
    exponential_model,
    intersection_growth,
    model_crossings,
    model_reference,
    power_model,
    pull_back,
    push_forward,
    verify_model_bounds,
)
from .singular import approximate_singular, singular_hardy_check, verify_decay_bounds
from .stability import (
    StabilityVerdict,
    StructureClassification,
    BarrierHypotheses,
    barrier_certificate,
    classify_structure,
    criteria_from_limits,
    fit_hypotheses,
    intersection_test,
    ordered_family_check,
    unstable_by_intersection,
)

__version__ = "0.1.0"
