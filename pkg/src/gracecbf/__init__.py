"""Safety filtering with control barrier functions, including graceful
two-layer constraints, an adaptive closed-loop simulator with collision
event detection, Lyapunov/invariance monitors, and a wall collision-avoidance
benchmark CLI.

The stepping hot loop has a compiled core (``gracecbf._kernel``) with a
pure-Python fallback selected at import; ``HAVE_FAST_KERNEL`` reports which
one is in use.
"""

from .analysis import (
    DescentReport,
    DomainError,
    InvarianceReport,
    LyapunovSample,
    MissingSignal,
    bound_trajectory,
    check_descent,
    check_invariance,
    implicit_bound_time,
    lyapunov_series,
    lyapunov_v1,
    lyapunov_v2,
)
from .barriers import (
    AffineControlConstraint,
    BarrierSpec,
    CatastropheBoundary,
    ClassKFn,
    ComplexRoots,
    DegenerateConstraint,
    DistanceBarrier,
    Family,
    GracefulBarrier,
    OutsideDomain,
    SafetyRegion,
    characteristic_roots,
    classify_region,
    control_constraint,
    exponential_constraint,
    graceful1_constraint,
    graceful2_constraint,
    high_order_h2,
    layer_transform,
    reciprocal_constraint,
    zeroing_constraint,
)
from .closedloop import safety_controller
from .filtering import (
    PD,
    BaselineLaw,
    FilterResult,
    ProportionalPosition,
    ZeroNormal,
    baseline_control,
    filter_projection,
    filter_scalar,
)
from .plants import ControlAffineSystem, double_integrator, first_order_integrator
from .runner import (
    RunRecord,
    RunSummary,
    VerifyReport,
    emit_csv,
    parse_csv,
    run_scenario,
    simulate_scenario,
    verify_all,
    verify_scenario,
)
from .scenarios import Scenario, UnknownScenario, get_scenario, registry
from .sim import (
    HAVE_FAST_KERNEL,
    ControllerUndefined,
    Event,
    EventKind,
    NoSignChange,
    SimConfig,
    StepUnderflow,
    Trajectory,
    dense_sample,
    integrate,
    integrate_internal,
    locate_event,
)

__version__ = "0.1.0"
