"""Dense matrix-function kernels.

Everything here works on plain ``numpy`` arrays. Functions that return a
mathematically symmetric matrix average it with its transpose before
returning, so that downstream Cholesky/eigh calls never see drift.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import DomainError, NotPositiveDefiniteError, PositivityViolation, ShapeError, SolverError

# relative eigenvalue floor in trace_chi_product / v_chiprime_v
POSITIVITY_RTOL = 1e-14


def as_square(A, name: str = "matrix") -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ShapeError(f"{name} has non-finite entries")
    return A


def symmetrize(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return 0.5 * (X + X.T)


def as_spd(S, name: str = "matrix") -> np.ndarray:
    """Validate and symmetrize a positive definite matrix.

    Raises :class:`NotPositiveDefiniteError` (naming ``name``) if a Cholesky
    factorization of the symmetrized input fails.
    """
    S = symmetrize(as_square(S, name))
    try:
        np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError(f"{name} is not positive definite") from None
    return S


def is_pd(S) -> bool:
    try:
        np.linalg.cholesky(symmetrize(S))
    except np.linalg.LinAlgError:
        return False
    return True


def expm(A, t: float = 1.0) -> np.ndarray:
    """Matrix exponential ``exp(A t)``.

    Scaling and squaring with a degree-13 Pade approximant (delegated to
    :func:`scipy.linalg.expm`). ``t`` may have either sign; ``t == 0``
    returns the identity exactly.
    """
    A = as_square(A, "A")
    t = float(t)
    if not np.isfinite(t):
        raise DomainError(f"time must be finite, got {t}")
    if t == 0.0:
        return np.eye(A.shape[0])
    return scipy.linalg.expm(A * t)


def _eigh_spd(S, name: str):
    S = symmetrize(as_square(S, name))
    w, Q = np.linalg.eigh(S)
    if w[0] <= 0.0:
        raise NotPositiveDefiniteError(f"{name} is not positive definite (min eigenvalue {w[0]:.3e})")
    return w, Q


def sqrtm_spd(S) -> np.ndarray:
    """Symmetric positive definite square root via a symmetric eigensolver."""
    w, Q = _eigh_spd(S, "S")
    return symmetrize((Q * np.sqrt(w)) @ Q.T)


def inv_sqrtm_spd(S) -> np.ndarray:
    """``S**(-1/2)`` for positive definite ``S``."""
    w, Q = _eigh_spd(S, "S")
    return symmetrize((Q / np.sqrt(w)) @ Q.T)


def logdet_spd(S) -> float:
    """``ln det S`` from the Cholesky pivots; never forms the determinant."""
    S = symmetrize(as_square(S, "S"))
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError("S is not positive definite") from None
    return float(2.0 * np.sum(np.log(np.diag(L))))


def lyap_solve(A, Q) -> np.ndarray:
    """Solve ``A X + X A^T + Q = 0`` by Kronecker vectorization.

    Dense ``n^2 x n^2`` solve, intended for ``n`` up to a few dozen. Raises
    :class:`SolverError` when the spectrum of ``A`` has a pair of eigenvalues
    summing to (numerically) zero, in which case the solution is not unique.
    """
    A = as_square(A, "A")
    Q = symmetrize(as_square(Q, "Q"))
    n = A.shape[0]
    if Q.shape != (n, n):
        raise ShapeError(f"Q has shape {Q.shape}, expected {(n, n)}")
    lam = np.linalg.eigvals(A)
    gap = np.min(np.abs(lam[:, None] + lam[None, :]))
    if gap <= 1e-12 * max(1.0, np.max(np.abs(lam))):
        raise SolverError("Lyapunov operator is singular: eigenvalues of A sum to zero")
    eye = np.eye(n)
    op = np.kron(A, eye) + np.kron(eye, A)
    try:
        x = np.linalg.solve(op, -Q.ravel())
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"Lyapunov solve failed: {exc}") from None
    return symmetrize(x.reshape(n, n))


def _check_omega(omega) -> np.ndarray:
    w = np.asarray(omega, dtype=float)
    if np.any(~(w > 0.0)):
        raise DomainError("chi is defined for omega > 0 only")
    return w


def chi(omega):
    """``-sqrt(1 + 4 w) - ln(sqrt(1 + 4 w) - 1)`` for ``w > 0``.

    Accepts scalars or arrays. The log argument is evaluated as
    ``4 w / (sqrt(1 + 4 w) + 1)`` to avoid cancellation for small ``w``.
    """
    w = _check_omega(omega)
    r = np.sqrt(1.0 + 4.0 * w)
    out = -r - np.log(4.0 * w / (r + 1.0))
    return float(out) if out.ndim == 0 else out


def chi_prime(omega):
    """Derivative of :func:`chi`: ``-(1 + sqrt(1 + 4 w)) / (2 w)``."""
    w = _check_omega(omega)
    out = -(1.0 + np.sqrt(1.0 + 4.0 * w)) / (2.0 * w)
    return float(out) if out.ndim == 0 else out


def _pair(U, V):
    U = symmetrize(as_square(U, "U"))
    V = symmetrize(as_square(V, "V"))
    if U.shape != V.shape:
        raise ShapeError(f"U {U.shape} and V {V.shape} differ in shape")
    return U, V


def _check_positive_spectrum(lam: np.ndarray) -> None:
    top = np.max(lam)
    if top <= 0.0 or lam[0] <= POSITIVITY_RTOL * top:
        raise PositivityViolation(
            f"eigenvalues of U V must be positive, got min {lam[0]:.3e} (max {top:.3e})"
        )


def sym_product_eigvals(U, V) -> np.ndarray:
    """Eigenvalues of ``U V`` through the SPD similarity ``U^(1/2) V U^(1/2)``."""
    U, V = _pair(U, V)
    R = sqrtm_spd(U)
    lam = np.linalg.eigvalsh(symmetrize(R @ V @ R))
    _check_positive_spectrum(lam)
    return lam


def trace_chi_product(U, V) -> float:
    """``Tr chi(U V)`` for positive definite ``U`` and ``V``."""
    return float(np.sum(chi(sym_product_eigvals(U, V))))


def v_chiprime_v(U, V) -> np.ndarray:
    """Symmetric form ``V^(1/2) chi'(V^(1/2) U V^(1/2)) V^(1/2)`` of ``V chi'(U V)``.

    This is the gradient of ``U -> Tr chi(U V)``.
    """
    U, V = _pair(U, V)
    R = sqrtm_spd(V)
    lam, Q = np.linalg.eigh(symmetrize(R @ U @ R))
    _check_positive_spectrum(lam)
    inner = (Q * chi_prime(lam)) @ Q.T
    return symmetrize(R @ inner @ R)
