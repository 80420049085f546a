"""Deterministic closed-loop simulation: fixed-step RK4 with zero-order-hold
control, per-step trajectory logging, and metric computation.

Runs are bit-reproducible: identical (scenario, controller, config) inputs
give identical logs, which the CLI turns into byte-identical CSV.
"""

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .controller import Infeasible, cbf_qp_control, sdre_tracking_control, ssdre_control
from .model import UnsafeEvaluation, barrier_value
from .riccati import EigenFailure, NotStabilizing, ResidualTooLarge, SubspaceSingular

__all__ = [
    "Metrics",
    "NonFiniteState",
    "SimConfig",
    "TrajectoryLog",
    "compute_metrics",
    "rk4_step",
    "safety_report",
    "simulate",
]

CONTROLLER_KINDS = ("ssdre", "sdre", "cbfqp")


class NonFiniteState(RuntimeError):
    """An integrator stage produced NaN/Inf."""


@dataclass(frozen=True)
class SimConfig:
    """Integration grid and initial conditions for one run.

    The control interval 1/control_rate must be an integer multiple of
    dt_integrator.
    """

    duration: float
    x0: np.ndarray
    v0: np.ndarray
    dt_integrator: float = 1e-3
    control_rate: float = 100.0

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float).reshape(-1))
        object.__setattr__(self, "v0", np.asarray(self.v0, dtype=float).reshape(-1))
        if self.duration <= 0.0:
            raise ValueError("duration must be positive")
        if self.dt_integrator <= 0.0 or self.control_rate <= 0.0:
            raise ValueError("dt_integrator and control_rate must be positive")
        sub = 1.0 / (self.dt_integrator * self.control_rate)
        if abs(sub - round(sub)) > 1e-12 * max(1.0, sub):
            raise ValueError(
                "dt_integrator * control_rate must divide 1 (integer sub-steps)"
            )

    @property
    def substeps(self) -> int:
        return int(round(1.0 / (self.dt_integrator * self.control_rate)))


@dataclass
class TrajectoryLog:
    """Time-indexed record of one closed-loop run; source of all metrics."""

    times: np.ndarray
    states: np.ndarray
    refs: np.ndarray
    inputs: np.ndarray
    barrier_values: np.ndarray
    constraint_values: np.ndarray
    errors: np.ndarray
    error_norms: np.ndarray
    status: str
    constraint_names: tuple
    barrier_names: tuple
    fail_reason: str = ""
    wall_time: float = 0.0


def rk4_step(flow, x, u, dt):
    """Classical RK4 update of xdot = flow(x, u) with u held across stages."""
    k1 = flow(x, u)
    k2 = flow(x + 0.5 * dt * k1, u)
    k3 = flow(x + 0.5 * dt * k2, u)
    k4 = flow(x + dt * k3, u)
    x_next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(x_next)):
        raise NonFiniteState("integrator stage produced a non-finite state")
    return x_next


def _safe_barrier_values(barriers, x, v):
    out = np.empty(len(barriers))
    for i, b in enumerate(barriers):
        try:
            out[i] = barrier_value(b, x, v)
        except UnsafeEvaluation:
            out[i] = np.nan
    return out


def simulate(scenario, controller_kind, config: Optional[SimConfig] = None):
    """Run one closed-loop simulation and return its TrajectoryLog.

    The plant and the reference generator integrate with RK4 at
    ``dt_integrator``; the control input is recomputed at ``control_rate``
    and held in between.  Controller failures never escape: an
    UnsafeEvaluation inside the barrier controller halts the run with
    status 'breached' (the barrier is undefined past the boundary), Riccati
    or QP failures halt it with 'solver_failed', and a run whose logged
    constraint values ever reach zero is marked 'breached' even if it
    integrates to the horizon.
    """
    if controller_kind not in CONTROLLER_KINDS:
        raise ValueError(f"unknown controller kind '{controller_kind}'")
    if controller_kind == "cbfqp" and scenario.nominal_law is None:
        raise ValueError(f"scenario '{scenario.name}' declares no nominal law for cbfqp")
    cfg = config if config is not None else scenario.config
    plant, ref = scenario.plant, scenario.ref
    if cfg.x0.size != plant.n or cfg.v0.size != ref.n_d:
        raise ValueError("config x0/v0 dimensions do not match the scenario")
    barriers = scenario.barriers
    constraints = scenario.constraints
    dt = cfg.dt_integrator
    n_steps = int(round(cfg.duration / dt))
    sub = cfg.substeps

    T = n_steps + 1
    times = np.arange(T) * dt
    states = np.empty((T, plant.n))
    refs = np.empty((T, ref.n_d))
    inputs = np.zeros((T, plant.m))
    zs = np.empty((T, len(barriers)))
    svals = np.empty((T, len(constraints)))
    errs = np.empty((T, plant.l))
    enorms = np.empty(T)

    def log_sample(k, x, v):
        states[k] = x
        refs[k] = v
        zs[k] = _safe_barrier_values(barriers, x, v)
        svals[k] = [c.value(x) for c in constraints]
        e = plant.output(x) - ref.output(v)
        errs[k] = e
        enorms[k] = np.linalg.norm(e)

    def control(x, v, t):
        if controller_kind == "ssdre":
            u, _, _ = ssdre_control(plant, ref, barriers, scenario.weights,
                                    scenario.gamma, x, v,
                                    augment_override=scenario.augment_override)
        elif controller_kind == "sdre":
            u, _ = sdre_tracking_control(plant, ref, scenario.weights, scenario.gamma,
                                         x, v, augment_override=scenario.augment_override)
        else:
            u = cbf_qp_control(scenario.nominal_law, constraints, scenario.kappas,
                               plant, x, v, t)
        return u

    x = cfg.x0.copy()
    v = cfg.v0.copy()
    u = np.zeros(plant.m)
    status = None
    fail_reason = ""
    ref_flow = lambda vv, _u: ref.flow(vv)
    plant_flow = plant.flow

    t_start = time.perf_counter()
    log_sample(0, x, v)
    k = 0
    while k < n_steps:
        if k % sub == 0:
            try:
                u = control(x, v, times[k])
            except UnsafeEvaluation as exc:
                status, fail_reason = "breached", f"t={times[k]:.3f}: {exc}"
                break
            except (NotStabilizing, SubspaceSingular, ResidualTooLarge,
                    EigenFailure, Infeasible) as exc:
                status = "solver_failed"
                fail_reason = (f"t={times[k]:.3f}, x={np.array2string(x, precision=4)}: "
                               f"{type(exc).__name__}: {exc}")
                break
            inputs[k] = u
        else:
            inputs[k] = u
        try:
            x = rk4_step(plant_flow, x, u, dt)
            v = rk4_step(ref_flow, v, None, dt)
        except NonFiniteState as exc:
            status, fail_reason = "solver_failed", f"t={times[k]:.3f}: {exc}"
            break
        k += 1
        log_sample(k, x, v)
    wall = time.perf_counter() - t_start

    last = k
    inputs[last] = u
    if status is None:
        status = "completed" if np.all(svals[: last + 1] > 0.0) else "breached"
    end = last + 1
    return TrajectoryLog(
        times=times[:end].copy(),
        states=states[:end].copy(),
        refs=refs[:end].copy(),
        inputs=inputs[:end].copy(),
        barrier_values=zs[:end].copy(),
        constraint_values=svals[:end].copy(),
        errors=errs[:end].copy(),
        error_norms=enorms[:end].copy(),
        status=status,
        constraint_names=tuple(c.name for c in constraints),
        barrier_names=tuple(b.name for b in barriers),
        fail_reason=fail_reason,
        wall_time=wall,
    )


@dataclass(frozen=True)
class Metrics:
    """Summary numbers for one run; integrals use the trapezoidal rule on
    the logged grid."""

    settling_time: Optional[float]
    J_e: float
    J: Optional[float]
    min_s: dict
    safety_ok: bool
    wall_time: float


def _settling_time(times, enorms, threshold):
    above = enorms >= threshold
    if not above.any():
        return float(times[0])
    last_violation = int(np.flatnonzero(above)[-1])
    if last_violation == times.size - 1:
        return None
    return float(times[last_violation + 1])


def compute_metrics(log: TrajectoryLog, settle_threshold, horizon=None, cost_weights=None):
    """Settling time, error integral J_e, weighted cost J, and safety minima.

    ``horizon`` restricts the integrals and the settling scan to t <= horizon;
    ``cost_weights`` is the scenario's (Q_of, R_of) pair and enables J.
    """
    if log.times.size == 0:
        raise ValueError("log is empty")
    if horizon is None:
        sel = slice(None)
    else:
        sel = log.times <= horizon + 1e-12
    t = log.times[sel]
    en = log.error_norms[sel]
    J_e = float(np.trapezoid(en, t))

    J = None
    if cost_weights is not None:
        Q_of, R_of = cost_weights
        xs, vs, es, us = log.states[sel], log.refs[sel], log.errors[sel], log.inputs[sel]
        integrand = np.empty(t.size)
        for i in range(t.size):
            Qi = np.atleast_2d(Q_of(xs[i], vs[i]))
            Ri = np.atleast_2d(R_of(xs[i]))
            integrand[i] = es[i] @ Qi @ es[i] + us[i] @ Ri @ us[i]
        J = float(np.trapezoid(integrand, t))

    min_s = {name: float(log.constraint_values[:, j].min())
             for j, name in enumerate(log.constraint_names)}
    safety_ok = all(val > 0.0 for val in min_s.values())
    return Metrics(
        settling_time=_settling_time(t, en, settle_threshold),
        J_e=J_e,
        J=J,
        min_s=min_s,
        safety_ok=safety_ok,
        wall_time=log.wall_time,
    )


def safety_report(log: TrajectoryLog):
    """Per-constraint (min_s, argmin_t, breached, first_breach_t)."""
    if log.times.size == 0:
        raise ValueError("log is empty")
    report = {}
    for j, name in enumerate(log.constraint_names):
        col = log.constraint_values[:, j]
        i_min = int(np.argmin(col))
        breached = bool(col[i_min] <= 0.0)
        first_breach = None
        if breached:
            first_breach = float(log.times[int(np.flatnonzero(col <= 0.0)[0])])
        report[name] = {
            "min_s": float(col[i_min]),
            "argmin_t": float(log.times[i_min]),
            "breached": breached,
            "first_breach_t": first_breach,
        }
    return report
