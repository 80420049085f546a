"""State-dependent coefficient plants, reference generators, safety
constraints, barrier states, and assembly of the barrier-augmented system.

A barrier state z = p(x) / q(s(x)) stays finite exactly while the safety
function s stays positive.  Appending its dynamics to the plant and the
reference generator yields an augmented SDC system; the controller module
solves a Riccati equation on that system at every control instant.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .riccati import spectral_abscissa

__all__ = [
    "AugmentedPoint",
    "BarrierState",
    "DiagnosticsReport",
    "DimensionMismatch",
    "ReferenceModel",
    "SafetyConstraint",
    "SdcPlant",
    "UnsafeEvaluation",
    "barrier_rates",
    "barrier_sdc",
    "barrier_value",
    "build_augmented",
    "pointwise_diagnostics",
    "validate_barrier_sdc",
    "validate_gamma",
]


class UnsafeEvaluation(RuntimeError):
    """A safety function is non-positive where the barrier needs it positive."""

    def __init__(self, constraint, value, x):
        self.constraint = constraint
        self.value = float(value)
        self.x = np.asarray(x, dtype=float)
        super().__init__(f"constraint '{constraint}' has s = {value:.6g} <= 0")


class DimensionMismatch(ValueError):
    """Inconsistent dimensions in a model definition or assembly."""


def _vec(x):
    return np.asarray(x, dtype=float).reshape(-1)


@dataclass(frozen=True)
class SdcPlant:
    """Plant in SDC form: xdot = A(x) x + g(x) u, y = H(x) x.

    ``f_of`` optionally supplies the true drift for validation and
    integration; when the drift has a component A(x) x cannot represent
    (e.g. a constant gravity term handled by a scenario's augmentation
    override), set ``sdc_exact=False`` to exempt the plant from the
    A(x) x == f(x) consistency check.
    """

    n: int
    m: int
    l: int
    A_of: Callable[[np.ndarray], np.ndarray]
    g_of: Callable[[np.ndarray], np.ndarray]
    H_of: Callable[[np.ndarray], np.ndarray]
    f_of: Optional[Callable[[np.ndarray], np.ndarray]] = None
    state_labels: Optional[tuple] = None
    sdc_exact: bool = True

    def drift(self, x):
        x = _vec(x)
        if self.f_of is not None:
            return _vec(self.f_of(x))
        return self.A_of(x) @ x

    def flow(self, x, u):
        x = _vec(x)
        return self.drift(x) + self.g_of(x) @ _vec(u)

    def output(self, x):
        x = _vec(x)
        return self.H_of(x) @ x


@dataclass(frozen=True)
class ReferenceModel:
    """Reference generator in SDC form: vdot = A_d(v) v, y_d = H_d(v) v.

    ``abscissa_samples`` is the finite set of reference states over which
    the discount-factor bound is certified.
    """

    n_d: int
    A_d_of: Callable[[np.ndarray], np.ndarray]
    H_d_of: Callable[[np.ndarray], np.ndarray]
    v0: np.ndarray
    abscissa_samples: tuple = ()

    def flow(self, v):
        v = _vec(v)
        return self.A_d_of(v) @ v

    def output(self, v):
        v = _vec(v)
        return self.H_d_of(v) @ v


@dataclass(frozen=True)
class SafetyConstraint:
    """One safety function s(x); the safe region is {x : s(x) > 0}."""

    name: str
    s_of: Callable[[np.ndarray], float]
    grad_s_of: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def value(self, x):
        return float(self.s_of(_vec(x)))

    def grad(self, x):
        x = _vec(x)
        if self.grad_s_of is not None:
            return _vec(self.grad_s_of(x))
        # central finite difference, relative-scaled step
        g = np.empty_like(x)
        for i in range(x.size):
            h = 1e-6 * (1.0 + abs(x[i]))
            xp = x.copy()
            xm = x.copy()
            xp[i] += h
            xm[i] -= h
            g[i] = (self.s_of(xp) - self.s_of(xm)) / (2.0 * h)
        return g


def _identity_q(s):
    return s


@dataclass(frozen=True)
class BarrierState:
    """Barrier state z = p(x, v) / q(prod_i s_i(x)) with declared SDC vectors.

    alpha/alpha_d/beta are scenario data, not auto-derived: the SDC form of
    the barrier dynamics zdot = alpha' x + alpha_d' v + beta' u is not
    unique, so each scenario declares its own choice and
    ``validate_barrier_sdc`` exposes any inconsistency with the chain rule.
    ``q_z_of`` is the (positive) cost weight attached to z.
    """

    name: str
    constraints: tuple
    p_of: Callable[[np.ndarray, np.ndarray], float]
    alpha_of: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    beta_of: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    q_z_of: Callable[[np.ndarray, float], float]
    alpha_d_of: Optional[Callable[[np.ndarray, np.ndarray, float], np.ndarray]] = None
    q_of: Callable[[float], float] = _identity_q

    def check_safe(self, x):
        x = _vec(x)
        for c in self.constraints:
            s = c.value(x)
            if s <= 0.0:
                raise UnsafeEvaluation(c.name, s, x)

    def denominator(self, x):
        x = _vec(x)
        prod = 1.0
        for c in self.constraints:
            s = c.value(x)
            if s <= 0.0:
                raise UnsafeEvaluation(c.name, s, x)
            prod *= s
        return float(self.q_of(prod))


def barrier_value(b: BarrierState, x, v):
    """Evaluate z = p / q(s); raises UnsafeEvaluation if any s_i <= 0."""
    x, v = _vec(x), _vec(v)
    z = float(b.p_of(x, v)) / b.denominator(x)
    if not np.isfinite(z):
        raise UnsafeEvaluation(b.name, 0.0, x)
    return z


def barrier_sdc(b: BarrierState, x, v, z):
    """SDC vectors (alpha, alpha_d, beta) of the barrier dynamics at (x, v, z)."""
    x, v = _vec(x), _vec(v)
    b.check_safe(x)
    alpha = _vec(b.alpha_of(x, v, z))
    beta = _vec(b.beta_of(x, v, z))
    if b.alpha_d_of is not None:
        alpha_d = _vec(b.alpha_d_of(x, v, z))
    else:
        alpha_d = np.zeros(v.size)
    return alpha, alpha_d, beta


def barrier_rates(b: BarrierState, plant: SdcPlant, x, v, u, h=1e-4,
                  ref: Optional[ReferenceModel] = None):
    """(zdot_pred, zdot_fd): the SDC prediction alpha'x + alpha_d'v + beta'u
    against a central finite difference of t -> barrier_value along the
    plant flow (and the reference flow, when ``ref`` is given), one RK4 step
    in each direction over +-h."""
    if not 0.0 < h <= 1e-3:
        raise ValueError("h must lie in (0, 1e-3]")
    x, v, u = _vec(x), _vec(v), _vec(u)
    z = barrier_value(b, x, v)
    alpha, alpha_d, beta = barrier_sdc(b, x, v, z)
    zdot_pred = float(alpha @ x + alpha_d @ v + beta @ u)

    def step(x0, v0, dt):
        def fused(xv):
            xx, vv = xv[: x.size], xv[x.size:]
            dv = ref.flow(vv) if ref is not None else np.zeros(v.size)
            return np.concatenate([plant.flow(xx, u), dv])

        y = np.concatenate([x0, v0])
        k1 = fused(y)
        k2 = fused(y + 0.5 * dt * k1)
        k3 = fused(y + 0.5 * dt * k2)
        k4 = fused(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return y[: x.size], y[x.size:]

    xp, vp = step(x, v, h)
    xm, vm = step(x, v, -h)
    zdot_fd = (barrier_value(b, xp, vp) - barrier_value(b, xm, vm)) / (2.0 * h)
    return zdot_pred, zdot_fd


def validate_barrier_sdc(b: BarrierState, plant: SdcPlant, x, v, u, h=1e-4,
                         ref: Optional[ReferenceModel] = None):
    """Residual |alpha'x + alpha_d'v + beta'u - zdot_fd|.

    A residual far above 1e-5 * (1 + |zdot_fd|) means the declared SDC
    vectors do not reproduce the barrier's actual time derivative.
    """
    zdot_pred, zdot_fd = barrier_rates(b, plant, x, v, u, h=h, ref=ref)
    return abs(zdot_pred - zdot_fd)


@dataclass(frozen=True)
class AugmentedPoint:
    """Augmented SDC matrices at one (x, v, z) point.

    State ordering is [x; v; z_1 .. z_N]; A_z carries the -gamma discount
    shift on every diagonal block and the barrier SDC rows, G_z stacks the
    input map over the barrier beta rows, and Q_z = diag(Q_1, q_z1..q_zN)
    with Q_1 the tracking-error quadratic form.  The evaluation point
    (x, v, z) rides along for override hooks.
    """

    A_z: np.ndarray
    G_z: np.ndarray
    Q_z: np.ndarray
    R: np.ndarray
    gamma: float
    N: int
    n: int
    n_d: int
    x: np.ndarray
    v: np.ndarray
    z: np.ndarray


def build_augmented(plant: SdcPlant, ref: ReferenceModel, barriers: Sequence[BarrierState],
                    weights, gamma, x, v, z_vec, override=None):
    """Assemble (A_z, G_z, Q_z, R) for the barrier-augmented tracking system.

    ``weights`` is a pair (Q_of, R_of) with Q_of(x, v) -> l x l and
    R_of(x) -> m x m.  ``override``, when given, is called as
    override(A_z, G_z, aug_ctx) -> (A_z, G_z) after default assembly and may
    replace any block (scenario-specific embeddings such as constant drift
    carried through the reference columns).
    """
    x, v = _vec(x), _vec(v)
    z_vec = _vec(z_vec)
    n, m, n_d = plant.n, plant.m, ref.n_d
    N = len(barriers)
    if x.size != n or v.size != n_d or z_vec.size != N:
        raise DimensionMismatch(
            f"expected |x|={n}, |v|={n_d}, |z|={N}; got {x.size}, {v.size}, {z_vec.size}"
        )
    for b in barriers:
        b.check_safe(x)

    dim = n + n_d + N
    A_z = np.zeros((dim, dim))
    A_z[:n, :n] = plant.A_of(x) - gamma * np.eye(n)
    A_z[n:n + n_d, n:n + n_d] = ref.A_d_of(v) - gamma * np.eye(n_d)
    G_z = np.zeros((dim, m))
    G_z[:n, :] = plant.g_of(x)
    for i, b in enumerate(barriers):
        alpha, alpha_d, beta = barrier_sdc(b, x, v, z_vec[i])
        if alpha.size != n or alpha_d.size != n_d or beta.size != m:
            raise DimensionMismatch(f"barrier '{b.name}' SDC vectors have wrong size")
        row = n + n_d + i
        A_z[row, :n] = alpha
        A_z[row, n:n + n_d] = alpha_d
        A_z[row, row] = -gamma
        G_z[row, :] = beta

    Q_of, R_of = weights
    Q = np.atleast_2d(np.asarray(Q_of(x, v), dtype=float))
    H = np.atleast_2d(plant.H_of(x))
    H_d = np.atleast_2d(ref.H_d_of(v))
    if Q.shape != (plant.l, plant.l) or H.shape != (plant.l, n) or H_d.shape != (plant.l, n_d):
        raise DimensionMismatch("output/weight dimensions inconsistent")
    HH = np.hstack([H, -H_d])
    Q_z = np.zeros((dim, dim))
    Q_z[:n + n_d, :n + n_d] = HH.T @ Q @ HH
    for i, b in enumerate(barriers):
        qz = float(b.q_z_of(x, z_vec[i]))
        if qz <= 0.0:
            raise ValueError(f"barrier '{b.name}' weight q_z must be positive, got {qz}")
        Q_z[n + n_d + i, n + n_d + i] = qz

    R = np.atleast_2d(np.asarray(R_of(x), dtype=float))
    if R.shape != (m, m):
        raise DimensionMismatch("R has wrong shape")

    aug = AugmentedPoint(A_z=A_z, G_z=G_z, Q_z=Q_z, R=R, gamma=float(gamma),
                         N=N, n=n, n_d=n_d, x=x, v=v, z=z_vec)
    if override is not None:
        A_z, G_z = override(A_z, G_z, aug)
        aug = AugmentedPoint(A_z=A_z, G_z=G_z, Q_z=Q_z, R=R, gamma=float(gamma),
                             N=N, n=n, n_d=n_d, x=x, v=v, z=z_vec)
    return aug


def validate_gamma(ref: ReferenceModel, gamma):
    """True iff gamma > 0 and gamma exceeds the reference spectral abscissa
    at every certified sample point."""
    if not ref.abscissa_samples:
        raise ValueError("reference has no abscissa samples to certify against")
    if gamma <= 0.0:
        return False
    for v in ref.abscissa_samples:
        if gamma <= spectral_abscissa(ref.A_d_of(_vec(v))):
            return False
    return True


def psd_sqrt(M, clip=1e-12):
    """Symmetric PSD square root via eigendecomposition (negatives clipped)."""
    M = 0.5 * (M + M.T)
    w, V = np.linalg.eigh(M)
    w = np.where(w > clip, w, 0.0)
    return (V * np.sqrt(w)) @ V.T


@dataclass(frozen=True)
class DiagnosticsReport:
    stabilizable: bool
    detectable: bool
    offending_stabilizable: tuple
    offending_detectable: tuple


def pointwise_diagnostics(aug: AugmentedPoint, tol=1e-8):
    """PBH stabilizability of (A_z, G_z) and detectability of (A_z, Q_z^1/2).

    Returns the two booleans plus the offending eigenvalues, if any.
    """
    C = psd_sqrt(aug.Q_z)
    eigs = np.linalg.eigvals(aug.A_z)
    bad_stab = []
    bad_det = []
    dim = aug.A_z.shape[0]
    for lam in eigs:
        if lam.real < -1e-9:
            continue
        M = np.hstack([lam * np.eye(dim) - aug.A_z, aug.G_z])
        sv = np.linalg.svd(M, compute_uv=False)
        if sv[0] == 0.0 or np.sum(sv > tol * sv[0]) < dim:
            bad_stab.append(complex(lam))
        Mo = np.vstack([lam * np.eye(dim) - aug.A_z, C])
        sv = np.linalg.svd(Mo, compute_uv=False)
        if sv[0] == 0.0 or np.sum(sv > tol * sv[0]) < dim:
            bad_det.append(complex(lam))
    return DiagnosticsReport(
        stabilizable=not bad_stab,
        detectable=not bad_det,
        offending_stabilizable=tuple(bad_stab),
        offending_detectable=tuple(bad_det),
    )
