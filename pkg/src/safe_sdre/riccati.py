"""Dense continuous algebraic Riccati equation (CARE) solving and pointwise
system-theoretic diagnostics (PBH rank tests, spectral abscissa).

The CARE solver runs at every control instant of the SDRE loop, so it is
deterministic, allocation-light, and fails loudly with typed errors instead
of returning garbage.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, schur, solve_continuous_lyapunov

__all__ = [
    "CareSolution",
    "EigenFailure",
    "NotStabilizing",
    "ResidualTooLarge",
    "SubspaceSingular",
    "pbh_detectable",
    "pbh_stabilizable",
    "solve_care",
    "spectral_abscissa",
]

# Eigenvalues closer to the imaginary axis than this count as marginal.
EPS_AXIS = 1e-9
# Default relative rank threshold for singular-value based PBH tests.
PBH_TOL = 1e-8

_MAX_REFINE = 3
_X1_COND_LIMIT = 1e12


class EigenFailure(RuntimeError):
    """Eigenvalue/Schur iteration did not converge."""


class NotStabilizing(RuntimeError):
    """The Hamiltonian has fewer than n strictly stable eigenvalues: no
    stabilizing CARE solution exists at this point."""


class SubspaceSingular(RuntimeError):
    """The stable invariant subspace does not graph over the state space
    (X1 numerically singular)."""


class ResidualTooLarge(RuntimeError):
    """CARE residual exceeds tolerance even after Newton-Kleinman refinement."""


@dataclass(frozen=True)
class CareSolution:
    """Stabilizing solution of A'P + PA - P G R^-1 G' P + Q = 0.

    P is symmetric PSD, ``residual_norm`` is the Frobenius norm of the
    equation residual at P, and ``closed_loop_abscissa`` is
    max Re lambda(A - G R^-1 G' P), negative for a stabilizing solution.
    """

    P: np.ndarray
    residual_norm: float
    closed_loop_abscissa: float


def _as_2d(M, name):
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M.reshape(-1, 1)
    if M.ndim != 2:
        raise ValueError(f"{name} must be a matrix, got ndim={M.ndim}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def _quasi_triangular_eigs(T):
    """Eigenvalues read off the diagonal of a real Schur form."""
    n = T.shape[0]
    eigs = np.empty(n, dtype=complex)
    i = 0
    while i < n:
        if i == n - 1 or abs(T[i + 1, i]) < 1e-14 * (1.0 + abs(T[i, i])):
            eigs[i] = T[i, i]
            i += 1
        else:
            # 2x2 block: eigenvalues of [[a, b], [c, d]]
            a, b = T[i, i], T[i, i + 1]
            c, d = T[i + 1, i], T[i + 1, i + 1]
            tr, det = a + d, a * d - b * c
            disc = complex(tr * tr / 4.0 - det) ** 0.5
            eigs[i] = tr / 2.0 + disc
            eigs[i + 1] = tr / 2.0 - disc
            i += 2
    return eigs


def _care_residual(A, G, Q, R_cho, P):
    K = cho_solve(R_cho, G.T @ P)
    return A.T @ P + P @ A - P @ G @ K + Q, K


def solve_care(A, G, Q, R):
    """Solve the CARE via the stable invariant subspace of the Hamiltonian.

    Forms the 2n x 2n Hamiltonian [[A, -G R^-1 G'], [-Q, -A']], orders its
    real Schur form so the n strictly stable eigenvalues lead, and recovers
    P = X2 X1^-1 from the subspace basis [X1; X2].  P is symmetrized and,
    if the residual warrants it, polished with up to 3 Newton-Kleinman
    steps (each a Lyapunov solve for the closed-loop iterate).

    Parameters
    ----------
    A : (n, n) array
    G : (n, m) array
    Q : (n, n) array, symmetric PSD
    R : (m, m) array, symmetric positive definite

    Raises
    ------
    NotStabilizing
        Fewer than n Hamiltonian eigenvalues with Re < -1e-9.
    SubspaceSingular
        cond(X1) > 1e12.
    ResidualTooLarge
        Residual above 1e-8 * (1 + ||Q||_F) after refinement.
    """
    A = _as_2d(A, "A")
    G = _as_2d(G, "G")
    Q = _as_2d(Q, "Q")
    R = _as_2d(R, "R")
    n = A.shape[0]
    m = G.shape[1]
    if A.shape != (n, n) or G.shape != (n, m) or Q.shape != (n, n) or R.shape != (m, m):
        raise ValueError("inconsistent CARE dimensions")
    if np.max(np.abs(Q - Q.T)) > 1e-10 * (1.0 + np.max(np.abs(Q))):
        raise ValueError("Q must be symmetric")
    if np.max(np.abs(R - R.T)) > 1e-10 * (1.0 + np.max(np.abs(R))):
        raise ValueError("R must be symmetric")
    try:
        R_cho = cho_factor(R)
    except np.linalg.LinAlgError as exc:
        raise ValueError("R must be positive definite") from exc

    GRinvGT = G @ cho_solve(R_cho, G.T)
    H = np.block([[A, -GRinvGT], [-Q, -A.T]])

    try:
        T, U, sdim = schur(H, output="real", sort=lambda re, im: re < -EPS_AXIS)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure("Schur decomposition of the Hamiltonian failed") from exc
    if sdim != n:
        ham_eigs = _quasi_triangular_eigs(T)
        stable = int(np.sum(ham_eigs.real < -EPS_AXIS))
        raise NotStabilizing(
            f"Hamiltonian has {stable} strictly stable eigenvalues, need {n}"
        )

    X1 = U[:n, :n]
    X2 = U[n:, :n]
    if np.linalg.cond(X1) > _X1_COND_LIMIT:
        raise SubspaceSingular(
            f"stable subspace basis X1 has condition number > {_X1_COND_LIMIT:g}"
        )
    P = np.linalg.solve(X1.T, X2.T).T
    P = 0.5 * (P + P.T)

    q_scale = 1.0 + np.linalg.norm(Q, "fro")
    resid, K = _care_residual(A, G, Q, R_cho, P)
    resid_norm = np.linalg.norm(resid, "fro")
    refinements = 0
    while resid_norm > 1e-10 * q_scale and refinements < _MAX_REFINE:
        # Newton-Kleinman: solve Acl' P+ + P+ Acl = -(Q + K' R K)
        Acl = A - G @ K
        P = solve_continuous_lyapunov(Acl.T, -(Q + K.T @ R @ K))
        P = 0.5 * (P + P.T)
        resid, K = _care_residual(A, G, Q, R_cho, P)
        resid_norm = np.linalg.norm(resid, "fro")
        refinements += 1
    if resid_norm > 1e-8 * q_scale:
        raise ResidualTooLarge(
            f"CARE residual {resid_norm:.3e} exceeds {1e-8 * q_scale:.3e} "
            f"after {refinements} refinement steps"
        )

    abscissa = float(np.max(np.linalg.eigvals(A - G @ K).real))
    return CareSolution(P=P, residual_norm=float(resid_norm), closed_loop_abscissa=abscissa)


def spectral_abscissa(A):
    """Largest real part over the eigenvalues of a square matrix."""
    A = _as_2d(A, "A")
    if A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    try:
        eigs = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure("eigenvalue iteration did not converge") from exc
    return float(np.max(eigs.real))


def _pbh_eigs(A):
    try:
        return np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure("eigenvalue iteration did not converge") from exc


def _rank(M, tol):
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


def pbh_stabilizable(A, B, tol=PBH_TOL):
    """PBH test: every marginal or unstable mode of A must be reachable.

    Modes with Re(lambda) >= -1e-9 are tested; the pair passes when every
    such lambda gives rank [lambda I - A, B] = n at the relative singular
    value threshold ``tol``.
    """
    A = _as_2d(A, "A")
    B = _as_2d(B, "B")
    n = A.shape[0]
    for lam in _pbh_eigs(A):
        if lam.real < -EPS_AXIS:
            continue
        M = np.hstack([lam * np.eye(n) - A, B])
        if _rank(M, tol) < n:
            return False
    return True


def pbh_detectable(A, C, tol=PBH_TOL):
    """Dual PBH test: rank [lambda I - A; C] = n for all Re(lambda) >= -1e-9."""
    A = _as_2d(A, "A")
    C = np.asarray(C, dtype=float)
    if C.ndim == 1:
        C = C.reshape(1, -1)
    n = A.shape[0]
    for lam in _pbh_eigs(A):
        if lam.real < -EPS_AXIS:
            continue
        M = np.vstack([lam * np.eye(n) - A, C])
        if _rank(M, tol) < n:
            return False
    return True
