"""Safe SDRE: barrier-state-augmented state-dependent Riccati equation control.

Synthesizes trajectory-tracking controllers that keep a nonlinear system
inside a user-declared safe set by augmenting the plant with barrier states
and solving a discounted Riccati equation pointwise along the trajectory.
Ships with conventional SDRE and CBF-QP baselines, a deterministic
closed-loop simulator, and a catalogue of benchmark scenarios.
"""

from .riccati import (
    CareSolution,
    EigenFailure,
    NotStabilizing,
    ResidualTooLarge,
    SubspaceSingular,
    pbh_detectable,
    pbh_stabilizable,
    solve_care,
    spectral_abscissa,
)
from .model import (
    AugmentedPoint,
    BarrierState,
    DimensionMismatch,
    ReferenceModel,
    SafetyConstraint,
    SdcPlant,
    UnsafeEvaluation,
    barrier_sdc,
    barrier_value,
    build_augmented,
    pointwise_diagnostics,
    validate_barrier_sdc,
    validate_gamma,
)
from .controller import (
    GainPartition,
    Infeasible,
    QpProblem,
    cbf_qp_control,
    qp_min_norm,
    sdre_tracking_control,
    ssdre_control,
)
from .sim import (
    Metrics,
    NonFiniteState,
    SimConfig,
    TrajectoryLog,
    compute_metrics,
    rk4_step,
    safety_report,
    simulate,
)
from .scenarios import (
    GammaRejected,
    InvalidOverride,
    Scenario,
    UnknownScenario,
    catalogue,
    load_scenario,
    self_check,
)

__version__ = "0.1.0"
