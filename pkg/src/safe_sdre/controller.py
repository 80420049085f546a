"""Online control laws: barrier-augmented SDRE tracking (single or multiple
barriers), the conventional SDRE tracking baseline, and a CBF-QP safety
filter solved exactly by active-set enumeration.
"""

from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import qr as _qr

from .model import BarrierState, ReferenceModel, SdcPlant, barrier_value, build_augmented
from .riccati import solve_care

__all__ = [
    "GainPartition",
    "Infeasible",
    "QpProblem",
    "cbf_qp_control",
    "qp_min_norm",
    "sdre_tracking_control",
    "ssdre_control",
]


class Infeasible(RuntimeError):
    """No active set yields a feasible point: the safety constraints conflict."""


@dataclass(frozen=True)
class GainPartition:
    """Gain K_z = R^-1 G_z' P_z split over [x; v; z]: u = -K1 x - K2 v - K3 z."""

    K1: np.ndarray
    K2: np.ndarray
    K3: np.ndarray

    def stacked(self):
        return np.hstack([self.K1, self.K2, self.K3])


def _gain_partition(K_z, n, n_d):
    return GainPartition(K1=K_z[:, :n], K2=K_z[:, n:n + n_d], K3=K_z[:, n + n_d:])


def ssdre_control(plant: SdcPlant, ref: ReferenceModel, barriers: Sequence[BarrierState],
                  weights, gamma, x, v, augment_override=None):
    """Safe SDRE control at one point.

    Evaluates the barrier states, assembles the augmented SDC system, solves
    its Riccati equation, and applies u = -K1 x - K2 v - K3 z.  The
    exponential discount scaling of the augmented state cancels in this
    feedback form, so the gain acts on the raw (x, v, z) stack.

    Raises UnsafeEvaluation if a barrier is undefined at x, and propagates
    Riccati solver errors (NotStabilizing, SubspaceSingular, ...), which a
    simulation must surface with the failing point.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    v = np.asarray(v, dtype=float).reshape(-1)
    z_vec = np.array([barrier_value(b, x, v) for b in barriers])
    aug = build_augmented(plant, ref, barriers, weights, gamma, x, v, z_vec,
                          override=augment_override)
    sol = solve_care(aug.A_z, aug.G_z, aug.Q_z, aug.R)
    K_z = np.linalg.solve(aug.R, aug.G_z.T @ sol.P)
    gains = _gain_partition(K_z, plant.n, ref.n_d)
    u = -(gains.K1 @ x + gains.K2 @ v + gains.K3 @ z_vec)
    return u, gains, z_vec


def sdre_tracking_control(plant: SdcPlant, ref: ReferenceModel, weights, gamma, x, v,
                          augment_override=None):
    """Conventional SDRE tracking: the same pipeline with no barrier rows."""
    u, gains, _ = ssdre_control(plant, ref, (), weights, gamma, x, v,
                                augment_override=augment_override)
    return u, gains


@dataclass(frozen=True)
class QpProblem:
    """Min-norm QP data: minimize 0.5 ||du||^2 s.t. b_i' du >= -c_i.

    Row i comes from a safety constraint with class-K gain kappa_i:
    b_i = g' grad(s_i) and c_i = grad(s_i)' (f + g ubar) + kappa_i s_i.
    """

    b_rows: np.ndarray
    c_terms: np.ndarray
    kappas: Optional[np.ndarray] = None


def _solve_active_set(B_S, c_S):
    # KKT for du = B_S' lam with B_S du = -c_S  =>  (B_S B_S') lam = -c_S
    gram = B_S @ B_S.T
    lam = np.linalg.solve(gram, -c_S)
    return B_S.T @ lam, lam


def qp_min_norm(qp: QpProblem):
    """Exact minimizer of 0.5 ||du||^2 subject to b_i' du >= -c_i.

    Enumerates candidate active sets by cardinality, then lexicographically,
    solving each equality-constrained KKT system; the first candidate with
    all multipliers >= -1e-12 and all inactive constraints satisfied within
    -1e-10 is returned.  A rank-deficient active set is reduced to a maximal
    independent subset before solving.  Deterministic by construction.
    """
    B = np.atleast_2d(np.asarray(qp.b_rows, dtype=float))
    c = np.asarray(qp.c_terms, dtype=float).reshape(-1)
    n_con, m = B.shape
    if c.size != n_con:
        raise ValueError("b_rows and c_terms disagree on the constraint count")
    if not (np.all(np.isfinite(B)) and np.all(np.isfinite(c))):
        raise ValueError("QP data must be finite")

    def feasible(du):
        return np.all(B @ du + c >= -1e-10)

    du0 = np.zeros(m)
    if feasible(du0):
        return du0

    for k in range(1, n_con + 1):
        for subset in combinations(range(n_con), k):
            idx = np.array(subset)
            B_S = B[idx]
            if np.linalg.matrix_rank(B_S) < k:
                # drop to a maximal independent row subset (QR with pivoting)
                _, _, piv = _qr(B_S.T, mode="economic", pivoting=True)
                keep = piv[: np.linalg.matrix_rank(B_S)]
                idx = idx[np.sort(keep)]
                B_S = B[idx]
            try:
                du, lam = _solve_active_set(B_S, c[idx])
            except np.linalg.LinAlgError:
                continue
            if np.all(lam >= -1e-12) and feasible(du):
                return du
    raise Infeasible("no active set yields a feasible point")


def cbf_qp_control(nominal: Callable, constraints, kappas, plant: SdcPlant, x, v, t):
    """Safety-filtered control u = ubar + du.

    ``nominal(x, v, t)`` supplies the tracking law ubar; the filter solves
    the min-norm QP enforcing sdot_i >= -kappa_i s_i for every constraint
    and adds the correction.  Raises Infeasible when the constraints
    conflict.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    ubar = np.asarray(nominal(x, v, t), dtype=float).reshape(-1)
    f = plant.drift(x)
    g = plant.g_of(x)
    rows = np.empty((len(constraints), plant.m))
    offs = np.empty(len(constraints))
    for i, (con, kap) in enumerate(zip(constraints, kappas)):
        grad = con.grad(x)
        rows[i] = g.T @ grad
        offs[i] = grad @ (f + g @ ubar) + kap * con.value(x)
    du = qp_min_norm(QpProblem(b_rows=rows, c_terms=offs, kappas=np.asarray(kappas, dtype=float)))
    return ubar + du
