"""Built-in benchmark scenarios, addressable by name, plus override handling
and a structural self-check.

Each scenario packages a plant, a reference generator, safety constraints,
barrier states with their declared SDC vectors, cost weights, a discount
factor, and default simulation settings.  Barrier SDC vectors are scenario
data rather than auto-derived: the factorization is not unique, so each
scenario commits to one and ``self_check`` reports how well it matches the
chain rule.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .model import (
    BarrierState,
    ReferenceModel,
    SafetyConstraint,
    SdcPlant,
    barrier_rates,
    barrier_value,
    build_augmented,
    pointwise_diagnostics,
    validate_gamma,
)
from .sim import SimConfig

__all__ = [
    "GammaRejected",
    "InvalidOverride",
    "Scenario",
    "SelfCheckReport",
    "UnknownScenario",
    "catalogue",
    "load_scenario",
    "sample_safe_states",
    "self_check",
]

GRAVITY = 9.81

OVERRIDE_KEYS = ("gamma", "q_z", "duration", "control_rate", "dt_integrator", "x0", "v0")


class UnknownScenario(KeyError):
    """Requested scenario name is not in the catalogue."""


class InvalidOverride(ValueError):
    """Override key unknown, of the wrong type, or out of range."""


class GammaRejected(ValueError):
    """Overridden discount factor fails the reference abscissa bound."""


@dataclass(frozen=True)
class Scenario:
    """Complete experiment definition; immutable and shareable across runs."""

    name: str
    description: str
    plant: SdcPlant
    ref: ReferenceModel
    constraints: tuple
    barriers: tuple
    weights: tuple
    gamma: float
    config: SimConfig
    settle_threshold: float
    nominal_law: Optional[Callable] = None
    kappas: Optional[tuple] = None
    augment_override: Optional[Callable] = None
    expected: Optional[dict] = None
    # sampling region for randomized structural checks
    sample_low: Optional[np.ndarray] = None
    sample_high: Optional[np.ndarray] = None
    sample_margin: float = 0.1
    u_scale: float = 1.0
    v_jitter: float = 0.0
    # unsafe-region geometry for figures: ("circle", (cx, cy), r) or
    # ("box_complement", half_width) in the first output plane
    geometry: tuple = ()


# ---------------------------------------------------------------------------
# shared pieces

def _tanh_over_x(t):
    # series keeps the coefficient C1 through zero
    if abs(t) < 1e-6:
        return 1.0 - t * t / 3.0
    return math.tanh(t) / t


def _mech_plant():
    """Two-axis mechanical system with smoothed Coulomb-like friction."""

    def damping(xi):
        return -(0.8 + 0.2 * math.exp(-100.0 * abs(xi))) * _tanh_over_x(xi) - 1.0

    def A_of(x):
        return np.array([
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [-1.0, 0.0, damping(x[2]), 0.0],
            [0.0, -1.0, 0.0, damping(x[3])],
        ])

    def f_of(x):
        def fric(xi):
            return -(0.8 + 0.2 * math.exp(-100.0 * abs(xi))) * math.tanh(xi)
        return np.array([x[2], x[3],
                         fric(x[2]) - x[2] - x[0] + 0.0,
                         fric(x[3]) - x[3] - x[1] + 0.0])

    g = np.vstack([np.zeros((2, 2)), np.eye(2)])
    H = np.hstack([np.eye(2), np.zeros((2, 2))])
    return SdcPlant(n=4, m=2, l=2,
                    A_of=A_of, g_of=lambda x: g, H_of=lambda x: H, f_of=f_of,
                    state_labels=("x1", "x2", "x3 [vel]", "x4 [vel]"))


def _vdp_reference():
    """Van der Pol oscillator as reference generator; abscissa peaks at 0.5."""

    def A_d_of(v):
        return np.array([[0.0, 1.0], [-1.0, 1.0 - v[0] ** 2]])

    samples = tuple(np.array([v1, 0.0]) for v1 in
                    (0.0, 0.5, -0.5, 1.0, -1.0, 1.5, -1.5, 2.0, -2.0, 2.32, -2.32))
    return ReferenceModel(n_d=2, A_d_of=A_d_of, H_d_of=lambda v: np.eye(2),
                          v0=np.array([2.0, 2.0]), abscissa_samples=samples)


def _conflict_reference():
    """Damped oscillator driven by an undamped one; its output leaves the
    safe box, putting tracking and safety in conflict."""
    A_d = np.array([
        [0.0, 1.0, 0.0, 0.0],
        [-1.0, -1.0, 0.0, 1.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0, 0.0],
    ])
    H_d = np.hstack([np.eye(2), np.zeros((2, 2))])
    v0 = np.array([2.0, 2.0, -2.0, 3.0])
    return ReferenceModel(n_d=4, A_d_of=lambda v: A_d, H_d_of=lambda v: H_d,
                          v0=v0, abscissa_samples=(v0,))


def _box_constraints():
    s1 = SafetyConstraint("x1_limit", lambda x: 9.0 - x[0] ** 2,
                          lambda x: np.array([-2.0 * x[0], 0.0, 0.0, 0.0]))
    s2 = SafetyConstraint("x2_limit", lambda x: 9.0 - x[1] ** 2,
                          lambda x: np.array([0.0, -2.0 * x[1], 0.0, 0.0]))
    return s1, s2


def _mech_weights():
    def Q_of(x, v):
        e0 = x[0] - v[0]
        e1 = x[1] - v[1]
        return (1e3 / (e0 * e0 + e1 * e1 + 1e-3)) * np.eye(2)

    return Q_of, lambda x: np.eye(2)


def _const_qz(value):
    return lambda x, z: value


def _single_box_barrier(q_z):
    """One barrier covering both amplitude limits, z = (x1^2+x2^2)/(s1 s2)."""
    s1, s2 = _box_constraints()

    def alpha(x, v, z):
        s1v = 9.0 - x[0] ** 2
        s2v = 9.0 - x[1] ** 2
        s = s1v * s2v
        return np.array([2.0 * z * x[2] / s1v, 2.0 * z * x[3] / s2v,
                         2.0 * x[0] / s, 2.0 * x[1] / s])

    return BarrierState(
        name="box",
        constraints=(s1, s2),
        p_of=lambda x, v: x[0] ** 2 + x[1] ** 2,
        alpha_of=alpha,
        beta_of=lambda x, v, z: np.zeros(2),
        q_z_of=_const_qz(q_z),
    ), (s1, s2)


# ---------------------------------------------------------------------------
# scenario builders

def _build_cs1_nonconflicted(gamma, q_z, x0, v0, duration, control_rate, dt):
    plant = _mech_plant()
    ref = _vdp_reference()
    barrier, constraints = _single_box_barrier(float(np.atleast_1d(q_z)[0]))
    return Scenario(
        name="cs1_nonconflicted",
        description="mechanical system tracking a van der Pol orbit inside "
                    "|x1|,|x2| < 3; safety and tracking agree",
        plant=plant, ref=ref,
        constraints=constraints, barriers=(barrier,),
        weights=_mech_weights(), gamma=gamma,
        config=SimConfig(duration=duration, x0=x0, v0=v0,
                         dt_integrator=dt, control_rate=control_rate),
        settle_threshold=0.1,
        expected={"ssdre": {"settling_time": 0.69, "J_e": 1.34},
                  "sdre": {"settling_time": 0.80, "J_e": 1.48}},
        sample_low=np.array([-2.5, -2.5, -5.0, -5.0]),
        sample_high=np.array([2.5, 2.5, 5.0, 5.0]),
        sample_margin=0.5, u_scale=5.0, v_jitter=0.5,
        geometry=(("box_complement", 3.0),),
    )


def _build_cs1_conflicted_single(gamma, q_z, x0, v0, duration, control_rate, dt):
    plant = _mech_plant()
    ref = _conflict_reference()
    barrier, constraints = _single_box_barrier(float(np.atleast_1d(q_z)[0]))
    return Scenario(
        name="cs1_conflicted_single",
        description="mechanical system chasing a reference that leaves the "
                    "safe box; one barrier state arbitrates the conflict",
        plant=plant, ref=ref,
        constraints=constraints, barriers=(barrier,),
        weights=_mech_weights(), gamma=gamma,
        config=SimConfig(duration=duration, x0=x0, v0=v0,
                         dt_integrator=dt, control_rate=control_rate),
        settle_threshold=0.1,
        sample_low=np.array([-2.5, -2.5, -6.0, -6.0]),
        sample_high=np.array([2.5, 2.5, 6.0, 6.0]),
        sample_margin=0.5, u_scale=5.0, v_jitter=0.5,
        geometry=(("box_complement", 3.0),),
    )


def _build_cs1_conflicted_multi(gamma, q_z, x0, v0, duration, control_rate, dt):
    plant = _mech_plant()
    ref = _conflict_reference()
    s1, s2 = _box_constraints()
    qz = np.atleast_1d(np.asarray(q_z, dtype=float))
    if qz.size == 1:
        qz = np.repeat(qz, 2)
    if qz.size != 2:
        raise InvalidOverride("cs1_conflicted_multi takes one or two q_z weights")

    def alpha_1(x, v, z):
        s1v = 9.0 - x[0] ** 2
        return np.array([0.0, 0.0, 2.0 * x[0] * (1.0 + z) / s1v, 2.0 * x[1] / s1v])

    def alpha_2(x, v, z):
        s2v = 9.0 - x[1] ** 2
        return np.array([0.0, 0.0, 2.0 * x[0] / s2v, 2.0 * x[1] * (1.0 + z) / s2v])

    b1 = BarrierState(name="x1_barrier", constraints=(s1,),
                      p_of=lambda x, v: x[0] ** 2 + x[1] ** 2,
                      alpha_of=alpha_1, beta_of=lambda x, v, z: np.zeros(2),
                      q_z_of=_const_qz(float(qz[0])))
    b2 = BarrierState(name="x2_barrier", constraints=(s2,),
                      p_of=lambda x, v: x[0] ** 2 + x[1] ** 2,
                      alpha_of=alpha_2, beta_of=lambda x, v, z: np.zeros(2),
                      q_z_of=_const_qz(float(qz[1])))
    return Scenario(
        name="cs1_conflicted_multi",
        description="conflicted tracking with one barrier state per amplitude "
                    "limit; per-constraint conservatism is tunable",
        plant=plant, ref=ref,
        constraints=(s1, s2), barriers=(b1, b2),
        weights=_mech_weights(), gamma=gamma,
        config=SimConfig(duration=duration, x0=x0, v0=v0,
                         dt_integrator=dt, control_rate=control_rate),
        settle_threshold=0.1,
        sample_low=np.array([-2.5, -2.5, -6.0, -6.0]),
        sample_high=np.array([2.5, 2.5, 6.0, 6.0]),
        sample_margin=0.5, u_scale=5.0, v_jitter=0.5,
        geometry=(("box_complement", 3.0),),
    )


def _build_cs1_three_constraints(gamma, q_z, x0, v0, duration, control_rate, dt):
    plant = _mech_plant()
    ref = _vdp_reference()
    s1, s2 = _box_constraints()
    s3 = SafetyConstraint("origin_disk", lambda x: x[0] ** 2 + x[1] ** 2 - 0.25,
                          lambda x: np.array([2.0 * x[0], 2.0 * x[1], 0.0, 0.0]))

    # declared SDC vectors for z = 5(x1^2+x2^2)/(s1 s2 s3); these are known
    # not to match the chain rule exactly -- self_check flags the residual,
    # and the scenario is judged on safety invariance and settling instead
    def alpha(x, v, z):
        s1v = 9.0 - x[0] ** 2
        s2v = 9.0 - x[1] ** 2
        s3v = x[0] ** 2 + x[1] ** 2 - 0.25
        s = s1v * s2v * s3v
        return np.array([
            10.0 * z * x[2] / s,
            10.0 * z * x[3] / s,
            10.0 * z * x[0] * (1.0 / s1v - 1.0 / s3v),
            10.0 * z * x[1] * (1.0 / s2v - 1.0 / s3v),
        ])

    barrier = BarrierState(
        name="box_and_disk",
        constraints=(s1, s2, s3),
        p_of=lambda x, v: 5.0 * (x[0] ** 2 + x[1] ** 2),
        alpha_of=alpha,
        beta_of=lambda x, v, z: np.zeros(2),
        q_z_of=_const_qz(float(np.atleast_1d(q_z)[0])),
    )
    return Scenario(
        name="cs1_three_constraints",
        description="mechanical tracking with amplitude limits plus a keep-out "
                    "disk at the origin, all folded into one barrier state",
        plant=plant, ref=ref,
        constraints=(s1, s2, s3), barriers=(barrier,),
        weights=_mech_weights(), gamma=gamma,
        config=SimConfig(duration=duration, x0=x0, v0=v0,
                         dt_integrator=dt, control_rate=control_rate),
        settle_threshold=0.1,
        expected={"ssdre": {"settling_time": 1.03, "settling_time_alt_x0": 1.14}},
        sample_low=np.array([-2.5, -2.5, -5.0, -5.0]),
        sample_high=np.array([2.5, 2.5, 5.0, 5.0]),
        sample_margin=0.3, u_scale=5.0, v_jitter=0.5,
        geometry=(("box_complement", 3.0), ("circle", (0.0, 0.0), 0.5)),
    )


def _robots_reference():
    # two harmonic blocks: unit-frequency circle and half-frequency circle,
    # both radius 2 from v0 = [0, 2, 0, 2]
    A_d = np.array([
        [0.0, 1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.5],
        [0.0, 0.0, -0.5, 0.0],
    ])
    v0 = np.array([0.0, 2.0, 0.0, 2.0])
    return ReferenceModel(n_d=4, A_d_of=lambda v: A_d, H_d_of=lambda v: np.eye(4),
                          v0=v0, abscissa_samples=(v0,)), A_d


def _build_robots(gamma, q_z, x0, v0, duration, control_rate, dt):
    g = np.eye(4)
    plant = SdcPlant(n=4, m=4, l=4,
                     A_of=lambda x: np.zeros((4, 4)),
                     g_of=lambda x: g,
                     H_of=lambda x: np.eye(4),
                     f_of=lambda x: np.zeros(4),
                     state_labels=("r1_x [m]", "r1_y [m]", "r2_x [m]", "r2_y [m]"))
    ref, A_d = _robots_reference()

    def circle(name, ix, iy):
        def s_of(x):
            return (x[ix] - 2.0) ** 2 + (x[iy] - 2.0) ** 2 - 1.5 ** 2

        def grad(x):
            out = np.zeros(4)
            out[ix] = 2.0 * (x[ix] - 2.0)
            out[iy] = 2.0 * (x[iy] - 2.0)
            return out

        return SafetyConstraint(name, s_of, grad)

    s1 = circle("obstacle_r1", 0, 1)
    s2 = circle("obstacle_r2", 2, 3)
    s3 = SafetyConstraint(
        "separation",
        lambda x: (x[0] - x[2]) ** 2 + (x[1] - x[3]) ** 2 - 0.1 ** 2,
        lambda x: np.array([2.0 * (x[0] - x[2]), 2.0 * (x[1] - x[3]),
                            -2.0 * (x[0] - x[2]), -2.0 * (x[1] - x[3])]))

    qz = np.atleast_1d(np.asarray(q_z, dtype=float))
    if qz.size == 1:
        qz = np.repeat(qz, 3)
    if qz.size != 3:
        raise InvalidOverride("robots takes one or three q_z weights")

    def obstacle_barrier(name, con, ix, iy, weight):
        def beta(x, v, z):
            s = con.s_of(x)
            out = np.zeros(4)
            out[ix] = 2.0 * (x[ix] - z * (x[ix] - 2.0)) / s
            out[iy] = 2.0 * (x[iy] - z * (x[iy] - 2.0)) / s
            return out

        return BarrierState(name=name, constraints=(con,),
                            p_of=lambda x, v: x[ix] ** 2 + x[iy] ** 2,
                            alpha_of=lambda x, v, z: np.zeros(4),
                            beta_of=beta, q_z_of=_const_qz(weight))

    def beta_sep(x, v, z):
        s = s3.s_of(x)
        return np.array([
            2.0 * (x[0] - z * (x[0] - x[2])) / s,
            2.0 * (x[1] - z * (x[1] - x[3])) / s,
            2.0 * (x[2] - z * (x[2] - x[0])) / s,
            2.0 * (x[3] - z * (x[3] - x[1])) / s,
        ])

    b1 = obstacle_barrier("z_obstacle_r1", s1, 0, 1, float(qz[0]))
    b2 = obstacle_barrier("z_obstacle_r2", s2, 2, 3, float(qz[1]))
    b3 = BarrierState(name="z_separation", constraints=(s3,),
                      p_of=lambda x, v: float(x @ x),
                      alpha_of=lambda x, v, z: np.zeros(4),
                      beta_of=beta_sep, q_z_of=_const_qz(float(qz[2])))

    def Q_of(x, v):
        e1 = x[:2] - v[:2]
        e2 = x[2:] - v[2:]
        q1 = 20.0 / (e1 @ e1 + 0.01)
        q2 = 10.0 / (e2 @ e2 + 0.01)
        return np.diag([q1, q1, q2, q2])

    def nominal(x, v, t):
        # proportional tracking plus the reference velocity feedforward
        return -(x - v) + A_d @ v

    return Scenario(
        name="robots",
        description="two mobile robots tracking circles of different periods "
                    "around a shared obstacle while avoiding each other",
        plant=plant, ref=ref,
        constraints=(s1, s2, s3), barriers=(b1, b2, b3),
        weights=(Q_of, lambda x: np.eye(4)), gamma=gamma,
        config=SimConfig(duration=duration, x0=x0, v0=v0,
                         dt_integrator=dt, control_rate=control_rate),
        settle_threshold=0.1,
        nominal_law=nominal, kappas=(2.0, 2.0, 2.0),
        expected={"ssdre": {"J": 334.47}, "cbfqp": {"J": 510.81}},
        sample_low=np.array([-3.0, -3.0, -3.0, -3.0]),
        sample_high=np.array([5.0, 5.0, 5.0, 5.0]),
        sample_margin=0.35, u_scale=3.0, v_jitter=0.5,
        geometry=(("circle", (2.0, 2.0), 1.5),),
    )


def _build_cable_sim(gamma, q_z, x0, v0, duration, control_rate, dt):
    m_r, h, w = 0.2, 0.4, 0.9

    def lengths(x):
        l1 = math.hypot(w - x[0], h - x[2])
        l2 = math.hypot(w + x[0], h - x[2])
        return l1, l2

    A = np.array([
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, 0.0, 0.0],
    ])

    def g_of(x):
        l1, l2 = lengths(x)
        return np.array([
            [0.0, 0.0],
            [(w - x[0]) / (m_r * l1), -(w + x[0]) / (m_r * l2)],
            [0.0, 0.0],
            [(h - x[2]) / (m_r * l1), (h - x[2]) / (m_r * l2)],
        ])

    # gravity cannot be written as A(x) x; it enters through the reference
    # columns of the augmented system (see override below)
    plant = SdcPlant(n=4, m=2, l=2,
                     A_of=lambda x: A,
                     g_of=g_of,
                     H_of=lambda x: np.array([[1.0, 0.0, 0.0, 0.0],
                                              [0.0, 0.0, 1.0, 0.0]]),
                     f_of=lambda x: np.array([x[1], 0.0, x[3], -GRAVITY]),
                     state_labels=("q1 [m]", "q1dot [m/s]", "q2 [m]", "q2dot [m/s]"),
                     sdc_exact=False)

    v0 = np.asarray(v0, dtype=float)
    ref = ReferenceModel(n_d=2, A_d_of=lambda v: np.zeros((2, 2)),
                         H_d_of=lambda v: np.eye(2),
                         v0=v0, abscissa_samples=(v0,))

    con = SafetyConstraint(
        "obstacle",
        lambda x: (x[0] + 0.2) ** 2 + x[2] ** 2 - 0.1 ** 2,
        lambda x: np.array([2.0 * (x[0] + 0.2), 0.0, 2.0 * x[2], 0.0]))

    def p_of(x, v):
        return (x[0] - v[0]) ** 2 + (x[2] - v[1]) ** 2

    def alpha(x, v, z):
        s = con.s_of(x)
        a2 = (2.0 * (x[0] - v[0]) - 2.0 * z * (x[0] + 0.2)) / s
        a4 = (2.0 * (x[2] - v[1]) - 2.0 * z * x[2]) / s
        return np.array([0.0, a2, 0.0, a4])

    if callable(q_z):
        q_z_of = q_z
    elif q_z is None:
        q_z_of = lambda x, z: 1e-2 / (1.0 + z)
    else:
        q_z_of = _const_qz(float(np.atleast_1d(q_z)[0]))

    barrier = BarrierState(name="target_error", constraints=(con,),
                           p_of=p_of, alpha_of=alpha,
                           beta_of=lambda x, v, z: np.zeros(2),
                           alpha_d_of=lambda x, v, z: np.zeros(2),
                           q_z_of=q_z_of)

    def Q_of(x, v):
        e0 = x[0] - v[0]
        e1 = x[2] - v[1]
        return np.eye(2) / (e0 * e0 + e1 * e1 + 1e-3)

    def gravity_override(A_z, G_z, aug):
        # carry the constant -g_r term through the reference columns:
        # a_{4,5} v1 + a_{4,6} v2 = -g_r for the current reference state
        vv = float(aug.v @ aug.v)
        if vv < 1e-12:
            raise ValueError("gravity embedding needs a nonzero reference state")
        A_z = A_z.copy()
        A_z[3, aug.n] = -GRAVITY * aug.v[0] / vv
        A_z[3, aug.n + 1] = -GRAVITY * aug.v[1] / vv
        return A_z, G_z

    return Scenario(
        name="cable_sim",
        description="cable-suspended planar robot reaching a setpoint while "
                    "skirting a circular keep-out region (simulation study)",
        plant=plant, ref=ref,
        constraints=(con,), barriers=(barrier,),
        weights=(Q_of, lambda x: 100.0 * np.eye(2)), gamma=gamma,
        config=SimConfig(duration=duration, x0=x0, v0=v0,
                         dt_integrator=dt, control_rate=control_rate),
        settle_threshold=0.01,
        augment_override=gravity_override,
        sample_low=np.array([-0.45, -0.3, -0.12, -0.3]),
        sample_high=np.array([0.1, 0.3, 0.12, 0.3]),
        sample_margin=0.01, u_scale=2.0, v_jitter=0.02,
        geometry=(("circle", (-0.2, 0.0), 0.1),),
    )

# ---------------------------------------------------------------------------
# catalogue and loading

_REGISTRY = {
    "cs1_nonconflicted": dict(
        builder=_build_cs1_nonconflicted, gamma=0.6, q_z=1.0,
        x0=(2.5, -2.5, 5.0, 2.0), v0=(2.0, 2.0),
        duration=10.0, control_rate=100.0, dt_integrator=1e-3),
    "cs1_conflicted_single": dict(
        builder=_build_cs1_conflicted_single, gamma=0.01, q_z=100.0,
        x0=(1.0, 1.0, -6.0, -5.0), v0=(2.0, 2.0, -2.0, 3.0),
        duration=10.0, control_rate=100.0, dt_integrator=1e-3),
    "cs1_conflicted_multi": dict(
        builder=_build_cs1_conflicted_multi, gamma=0.01, q_z=(10.0, 10.0),
        x0=(1.0, 1.0, -6.0, -5.0), v0=(2.0, 2.0, -2.0, 3.0),
        duration=10.0, control_rate=100.0, dt_integrator=1e-3),
    "cs1_three_constraints": dict(
        builder=_build_cs1_three_constraints, gamma=0.6, q_z=100.0,
        x0=(2.5, -2.5, 5.0, 2.0), v0=(2.0, 2.0),
        duration=10.0, control_rate=100.0, dt_integrator=1e-3),
    "robots": dict(
        builder=_build_robots, gamma=0.1, q_z=(1e-3, 1e-3, 1e-3),
        x0=(3.0, 4.0, 4.0, 3.0), v0=(0.0, 2.0, 0.0, 2.0),
        duration=8.0 * math.pi, control_rate=100.0, dt_integrator=1e-3),
    "cable_sim": dict(
        builder=_build_cable_sim, gamma=0.01, q_z=None,
        x0=(-0.02, 0.0, 0.0, 0.0), v0=(-0.35, 0.05),
        duration=10.0, control_rate=100.0, dt_integrator=1e-3),
}


def catalogue():
    """Names of the built-in scenarios, in a fixed order."""
    return list(_REGISTRY.keys())


def _as_float(value, key):
    try:
        out = float(value)
    except (TypeError, ValueError) as exc:
        raise InvalidOverride(f"override '{key}' must be a number, got {value!r}") from exc
    if not np.isfinite(out):
        raise InvalidOverride(f"override '{key}' must be finite")
    return out


def _as_vector(value, key):
    try:
        out = np.asarray(value, dtype=float).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise InvalidOverride(f"override '{key}' must be a numeric vector") from exc
    if not np.all(np.isfinite(out)):
        raise InvalidOverride(f"override '{key}' must be finite")
    return out


def load_scenario(name, overrides=None):
    """Construct a catalogue scenario, optionally overriding
    gamma / q_z / duration / control_rate / dt_integrator / x0 / v0.

    Raises UnknownScenario, InvalidOverride (bad key, type, or range), or
    GammaRejected (override fails the reference abscissa bound).
    """
    if name not in _REGISTRY:
        raise UnknownScenario(name)
    spec = dict(_REGISTRY[name])
    builder = spec.pop("builder")
    overrides = dict(overrides or {})
    for key in overrides:
        if key not in OVERRIDE_KEYS:
            raise InvalidOverride(f"unknown override '{key}' "
                                  f"(allowed: {', '.join(OVERRIDE_KEYS)})")

    if "gamma" in overrides:
        spec["gamma"] = _as_float(overrides["gamma"], "gamma")
    for key in ("duration", "control_rate", "dt_integrator"):
        if key in overrides:
            val = _as_float(overrides[key], key)
            if val <= 0.0:
                raise InvalidOverride(f"override '{key}' must be positive")
            spec[key] = val
    for key in ("x0", "v0"):
        if key in overrides:
            spec[key] = _as_vector(overrides[key], key)
    if "q_z" in overrides:
        qz = _as_vector(overrides["q_z"], "q_z")
        if np.any(qz <= 0.0):
            raise InvalidOverride("override 'q_z' weights must be positive")
        spec["q_z"] = qz

    try:
        scenario = builder(
            gamma=spec["gamma"], q_z=spec["q_z"],
            x0=np.asarray(spec["x0"], dtype=float),
            v0=np.asarray(spec["v0"], dtype=float),
            duration=spec["duration"], control_rate=spec["control_rate"],
            dt=spec["dt_integrator"])
    except InvalidOverride:
        raise
    except ValueError as exc:
        raise InvalidOverride(str(exc)) from exc

    if scenario.config.x0.size != scenario.plant.n:
        raise InvalidOverride(f"x0 must have length {scenario.plant.n}")
    if scenario.config.v0.size != scenario.ref.n_d:
        raise InvalidOverride(f"v0 must have length {scenario.ref.n_d}")
    if not validate_gamma(scenario.ref, scenario.gamma):
        raise GammaRejected(
            f"gamma={scenario.gamma} does not exceed the reference spectral "
            f"abscissa over the certified samples")
    for con in scenario.constraints:
        s0 = con.value(scenario.config.x0)
        if s0 <= 0.0:
            raise InvalidOverride(
                f"x0 violates constraint '{con.name}' (s = {s0:.6g} <= 0)")
    return scenario


def sample_safe_states(scenario, n, rng):
    """n random (x, v, u) tuples with every s_i(x) above the scenario's
    sampling margin; used by self_check and the structural test-suites."""
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    low, high = scenario.sample_low, scenario.sample_high
    if low is None or high is None:
        raise ValueError(f"scenario '{scenario.name}' declares no sampling box")
    out = []
    attempts = 0
    while len(out) < n:
        attempts += 1
        if attempts > 10000 * n:
            raise RuntimeError("safe-state sampling is not terminating; "
                               "check the sampling box and margin")
        x = rng.uniform(low, high)
        if all(c.value(x) > scenario.sample_margin for c in scenario.constraints):
            v = scenario.ref.v0 + rng.uniform(-scenario.v_jitter, scenario.v_jitter,
                                              size=scenario.ref.n_d)
            u = rng.uniform(-scenario.u_scale, scenario.u_scale, size=scenario.plant.m)
            out.append((x, v, u))
    return out


BARRIER_RESIDUAL_TOL = 1e-5


@dataclass(frozen=True)
class SelfCheckReport:
    """Structural health report for one scenario."""

    scenario: str
    gamma_ok: bool
    stabilizable: bool
    detectable: bool
    barrier_residuals: dict
    drift_consistent: bool
    flags: tuple

    @property
    def clean(self):
        return not self.flags


def self_check(scenario, n_points=20, seed=0):
    """Run the scenario's structural checks and return a report.

    Checks: the discount factor bound, PBH stabilizability/detectability of
    the augmented system at x0, chain-rule consistency of every barrier's
    declared SDC vectors at random safe points (relative residual against a
    finite-difference rate), and drift consistency A(x) x == f(x) where the
    plant claims an exact SDC form.  Report-only; never raises for a flag.
    """
    flags = []
    gamma_ok = validate_gamma(scenario.ref, scenario.gamma)
    if not gamma_ok:
        flags.append("gamma fails the reference spectral-abscissa bound")

    x0, v0 = scenario.config.x0, scenario.config.v0
    z0 = np.array([barrier_value(b, x0, v0) for b in scenario.barriers])
    aug = build_augmented(scenario.plant, scenario.ref, scenario.barriers,
                          scenario.weights, scenario.gamma, x0, v0, z0,
                          override=scenario.augment_override)
    diag = pointwise_diagnostics(aug)
    if not diag.stabilizable:
        flags.append("augmented pair (A_z, G_z) not pointwise stabilizable at x0")
    if not diag.detectable:
        flags.append("augmented pair (A_z, Q_z^1/2) not pointwise detectable at x0")

    points = sample_safe_states(scenario, n_points, np.random.default_rng(seed))
    residuals = {b.name: 0.0 for b in scenario.barriers}
    for b in scenario.barriers:
        worst = 0.0
        for x, v, u in points:
            pred, fd = barrier_rates(b, scenario.plant, x, v, u, ref=scenario.ref)
            worst = max(worst, abs(pred - fd) / (1.0 + abs(fd)))
        residuals[b.name] = worst
        if worst > BARRIER_RESIDUAL_TOL:
            flags.append(f"barrier '{b.name}' SDC residual {worst:.3e} exceeds "
                         f"{BARRIER_RESIDUAL_TOL:g} (declared vectors are not "
                         f"chain-rule consistent)")

    drift_ok = True
    if scenario.plant.sdc_exact and scenario.plant.f_of is not None:
        for x, _, _ in points:
            f = scenario.plant.f_of(x)
            err = np.linalg.norm(scenario.plant.A_of(x) @ x - f)
            if err > 1e-8 * (1.0 + np.linalg.norm(f)):
                drift_ok = False
                flags.append(f"SDC drift mismatch: |A(x)x - f(x)| = {err:.3e}")
                break

    return SelfCheckReport(
        scenario=scenario.name,
        gamma_ok=gamma_ok,
        stabilizable=diag.stabilizable,
        detectable=diag.detectable,
        barrier_residuals=residuals,
        drift_consistent=drift_ok,
        flags=tuple(flags),
    )
