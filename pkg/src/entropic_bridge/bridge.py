"""Closed-form minimum noise relative-entropy supply between Gaussian laws.

For a horizon ``T`` write ``G = Gamma_T`` for the controllability Gramian and

    U_T(Sigma) = G^{-1/2} C_T(Sigma) G^{-1/2} - I,
    V_T(Theta) = G^{-1/2} Theta G^{-1/2}.

The covariance part of the supply is

    S_T(Sigma, Theta) = ln det(2 U) + Tr(U + V + chi(U V)),

the mean part is ``|alpha_T - M_T(alpha_0)|^2`` in the ``G^{-1}`` norm, and the
total supply (in nats) is half their sum. ``S_T`` solves the Hamilton-Jacobi
equation ``d_T S = F(Sigma, d_Sigma S)`` with
``F(Sigma, Phi) = Tr((C(Sigma) - D Phi Sigma) Phi)`` and vanishes exactly on
nominally reachable pairs ``Theta = C_T(Sigma)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import matfun
from .errors import BridgeError, PositivityViolation, ShapeError
from .nominal import GaussianState, SystemModel, checked_gramian, cov_semigroup, generator_cov, mean_semigroup

# the eigenvalue form and the sqrt(I + 4UV) form must agree to this, relative to max(1, Tr U + Tr V)
CONSISTENCY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class BridgeProblem:
    """Model, horizon and the Gaussian endpoint laws ``sigma -> theta``."""

    model: SystemModel
    T: float
    sigma: GaussianState
    theta: GaussianState

    def __post_init__(self):
        T = float(self.T)
        if not (T > 0 and math.isfinite(T)):
            raise ShapeError(f"horizon T must be positive and finite, got {self.T}")
        object.__setattr__(self, "T", T)
        n = self.model.n
        for name, state in (("sigma", self.sigma), ("theta", self.theta)):
            if state.n != n:
                raise ShapeError(f"{name} has dimension {state.n}, model has {n}")
        checked_gramian(self.model, T)

    @property
    def n(self) -> int:
        return self.model.n


@dataclass(frozen=True)
class SupplyBreakdown:
    mean_part: float
    cov_part: float
    total: float


@dataclass(frozen=True, eq=False)
class CorrectionTerms:
    """Coefficients of the starting solution and of the trace-analytic correction.

    Only the ``lambda = 0, tau = -1`` branch is represented.
    """

    Xi_T: np.ndarray
    Ups_T: float
    mho: np.ndarray
    rho: float
    rho_T: float
    Psi_sq: np.ndarray
    lam: float = 0.0
    tau: float = -1.0


class _Horizon:
    """Factors of the Gramian over one horizon, computed once."""

    __slots__ = ("G", "G_isqrt", "E", "L")

    def __init__(self, model: SystemModel, T: float):
        self.G = checked_gramian(model, T)
        self.G_isqrt = matfun.inv_sqrtm_spd(self.G)
        self.E = matfun.expm(model.A, T)
        self.L = self.G_isqrt @ self.E

    def U(self, Sigma: np.ndarray) -> np.ndarray:
        # C_T(Sigma) - Gamma_T = e^{AT} Sigma e^{A^T T}, so U = L Sigma L^T without cancellation
        return matfun.symmetrize(self.L @ Sigma @ self.L.T)

    def V(self, Theta: np.ndarray) -> np.ndarray:
        return matfun.symmetrize(self.G_isqrt @ Theta @ self.G_isqrt)


def _spd(model: SystemModel, X, name: str) -> np.ndarray:
    X = matfun.as_spd(X, name)
    if X.shape != (model.n, model.n):
        raise ShapeError(f"{name} must be {model.n} x {model.n}, got {X.shape}")
    return X


def u_matrix(model: SystemModel, T: float, Sigma) -> np.ndarray:
    return _Horizon(model, T).U(_spd(model, Sigma, "Sigma"))


def v_matrix(model: SystemModel, T: float, Theta) -> np.ndarray:
    return _Horizon(model, T).V(_spd(model, Theta, "Theta"))


def _cov_supply_uv(U: np.ndarray, V: np.ndarray) -> float:
    # chi(w) = -r - ln(4w) + ln(1 + r) with r = sqrt(1 + 4w); summing -ln(4w) over the
    # spectrum of UV cancels ln det(2U) exactly and leaves -n ln 2 - ln det V
    r = np.sqrt(1.0 + 4.0 * matfun.sym_product_eigvals(U, V))
    return float(
        np.trace(U) + np.trace(V) - matfun.logdet_spd(V)
        + np.sum(np.log1p(r) - math.log(2.0) - r)
    )


def cov_supply(model: SystemModel, T: float, Sigma, Theta) -> float:
    """Covariance part ``S_T(Sigma, Theta)`` of twice the minimum supply.

    Evaluated as ``Tr U + Tr V - ln det V + sum_i (ln((1 + r_i)/2) - r_i)``,
    ``r_i = sqrt(1 + 4 w_i)`` over the eigenvalues ``w_i`` of ``U V``, which is
    ``ln det(2U) + Tr(U + V + chi(U V))`` with the ``ln det U`` cancellation done
    analytically (``U`` is tiny on long horizons).
    """
    h = _Horizon(model, T)
    return _cov_supply_uv(h.U(_spd(model, Sigma, "Sigma")), h.V(_spd(model, Theta, "Theta")))


def cov_supply_sqrt_form(model: SystemModel, T: float, Sigma, Theta) -> float:
    """Same quantity as :func:`cov_supply`, through ``sqrt(I + 4 U V)``.

    ``Tr(U + V - R) - ln det((R - I)(2U)^{-1})`` with ``R = sqrt(I + 4 U V)``;
    both trace and determinant are evaluated on the similar SPD matrix
    ``sqrt(I + 4 U^{1/2} V U^{1/2})``.
    """
    h = _Horizon(model, T)
    U = h.U(_spd(model, Sigma, "Sigma"))
    V = h.V(_spd(model, Theta, "Theta"))
    n = U.shape[0]
    Ur = matfun.sqrtm_spd(U)
    R = matfun.sqrtm_spd(np.eye(n) + 4.0 * matfun.symmetrize(Ur @ V @ Ur))
    return float(
        np.trace(U) + np.trace(V) - np.trace(R)
        - matfun.logdet_spd(R - np.eye(n))
        + n * math.log(2.0)
        + matfun.logdet_spd(U)
    )


def mean_supply(model: SystemModel, T: float, alpha0, alphaT) -> float:
    """``(alpha_T - M_T(alpha_0))^T Gamma_T^{-1} (alpha_T - M_T(alpha_0))``."""
    G = checked_gramian(model, T)
    d = np.asarray(alphaT, dtype=float).reshape(-1) - mean_semigroup(model, T, alpha0)
    return float(d @ scipy.linalg.cho_solve(scipy.linalg.cho_factor(G), d))


def total_supply(problem: BridgeProblem) -> SupplyBreakdown:
    """Minimum noise relative-entropy supply between ``problem.sigma`` and ``problem.theta``.

    The covariance part is computed twice, by the ``chi`` form and by the
    ``sqrt(I + 4UV)`` form, and a disagreement beyond ``CONSISTENCY_TOL``
    raises :class:`BridgeError`.
    """
    m, T = problem.model, problem.T
    mp = mean_supply(m, T, problem.sigma.alpha, problem.theta.alpha)
    cp = cov_supply(m, T, problem.sigma.Pi, problem.theta.Pi)
    alt = cov_supply_sqrt_form(m, T, problem.sigma.Pi, problem.theta.Pi)
    h = _Horizon(m, T)
    scale = max(1.0, float(np.trace(h.U(problem.sigma.Pi)) + np.trace(h.V(problem.theta.Pi))))
    if abs(cp - alt) > CONSISTENCY_TOL * scale:
        raise BridgeError(f"covariance supply forms disagree: {cp!r} vs {alt!r}")
    return SupplyBreakdown(mean_part=mp, cov_part=cp, total=0.5 * (mp + cp))


def grad_S_sigma(model: SystemModel, T: float, Sigma, Theta) -> np.ndarray:
    """Analytic gradient ``d S_T / d Sigma``.

    ``L^T (U^{-1} + I + V^{1/2} chi'(W) V^{1/2}) L`` with
    ``L = Gamma_T^{-1/2} e^{AT}`` and ``W = V^{1/2} U V^{1/2}``. Since
    ``chi'(w) = -1/w - 2/(1 + sqrt(1 + 4w))`` and ``V^{1/2} W^{-1} V^{1/2} = U^{-1}``,
    the bracket is evaluated as ``I - 2 V^{1/2} (I + sqrt(I + 4W))^{-1} V^{1/2}``,
    which avoids cancelling the large ``U^{-1}`` on long horizons.
    """
    h = _Horizon(model, T)
    U = h.U(_spd(model, Sigma, "Sigma"))
    V = h.V(_spd(model, Theta, "Theta"))
    return matfun.symmetrize(h.L.T @ _grad_bracket(U, V) @ h.L)


def _grad_bracket(U: np.ndarray, V: np.ndarray) -> np.ndarray:
    R = matfun.sqrtm_spd(V)
    lam, Q = np.linalg.eigh(matfun.symmetrize(R @ U @ R))
    if lam[0] <= matfun.POSITIVITY_RTOL * lam[-1]:
        raise PositivityViolation(f"eigenvalues of U V must be positive, got min {lam[0]:.3e}")
    mid = (Q * (2.0 / (1.0 + np.sqrt(1.0 + 4.0 * lam)))) @ Q.T
    return matfun.symmetrize(np.eye(U.shape[0]) - R @ mid @ R)


def hamiltonian(model: SystemModel, Sigma, Phi) -> float:
    """``F(Sigma, Phi) = Tr((A Sigma + Sigma A^T + D - D Phi Sigma) Phi)``."""
    Sigma = np.asarray(Sigma, dtype=float)
    Phi = np.asarray(Phi, dtype=float)
    if Sigma.shape != (model.n, model.n) or Phi.shape != Sigma.shape:
        raise ShapeError("Sigma and Phi must both be n x n")
    return float(np.trace((generator_cov(model, Sigma) - model.D @ Phi @ Sigma) @ Phi))


def starting_solution(model: SystemModel, T: float, Sigma) -> float:
    """Particular HJE solution ``ln det U_T + Tr U_T`` (ignores the boundary condition)."""
    U = u_matrix(model, T, Sigma)
    return matfun.logdet_spd(U) + float(np.trace(U))


def grad_starting_solution(model: SystemModel, T: float, Sigma) -> np.ndarray:
    """``Sigma^{-1} + Xi_T`` with ``Xi_T = e^{A^T T} Gamma_T^{-1} e^{AT}``."""
    Sigma = _spd(model, Sigma, "Sigma")
    h = _Horizon(model, T)
    return matfun.symmetrize(np.linalg.inv(Sigma) + h.L.T @ h.L)


def _time_step(T: float) -> float:
    return 1e-5 * max(1.0, T)


def hje_residual(model: SystemModel, T: float, Sigma, Theta, part: str = "full") -> float:
    """Relative residual ``|d_T S - F(Sigma, d_Sigma S)| / max(1, |F|)``.

    ``d_T S`` is a central difference with step ``1e-5 max(1, T)``; the
    gradient is analytic. ``part="hat"`` checks the starting solution alone.
    """
    h = _time_step(T)
    if part == "full":
        dT = (cov_supply(model, T + h, Sigma, Theta) - cov_supply(model, T - h, Sigma, Theta)) / (2 * h)
        Phi = grad_S_sigma(model, T, Sigma, Theta)
    elif part == "hat":
        dT = (starting_solution(model, T + h, Sigma) - starting_solution(model, T - h, Sigma)) / (2 * h)
        Phi = grad_starting_solution(model, T, Sigma)
    else:
        raise ValueError(f"part must be 'full' or 'hat', got {part!r}")
    F = hamiltonian(model, Sigma, Phi)
    return abs(dT - F) / max(1.0, abs(F))


def correction_terms(model: SystemModel, T: float, Theta) -> CorrectionTerms:
    Theta = _spd(model, Theta, "Theta")
    h = _Horizon(model, T)
    G_inv = np.linalg.inv(h.G)
    n = model.n
    rho = n * math.log(2.0)
    return CorrectionTerms(
        Xi_T=matfun.symmetrize(h.L.T @ h.L),
        Ups_T=2.0 * T * float(np.trace(model.A)) - matfun.logdet_spd(h.G),
        mho=matfun.symmetrize(np.linalg.inv(Theta)),
        rho=rho,
        rho_T=rho + float(np.trace(Theta @ G_inv)),
        Psi_sq=matfun.symmetrize(h.E.T @ G_inv @ Theta @ G_inv @ h.E),
    )


def correction_decomposition(model: SystemModel, T: float, Sigma, Theta) -> tuple[float, float]:
    """Split ``S_T`` into the starting solution and the correcting term.

    Returns ``(s_hat, s_tilde)`` with ``s_hat = ln det U + Tr U`` and
    ``s_tilde = Tr chi(U V) + rho_T``, ``rho_T = n ln 2 + Tr(Theta Gamma_T^{-1})``.
    The correcting term is assembled from :func:`correction_terms` and must
    reproduce :func:`cov_supply` to 1e-10 (relative to ``max(1, Tr U + Tr V)``).
    """
    Sigma = _spd(model, Sigma, "Sigma")
    terms = correction_terms(model, T, Theta)
    h = _Horizon(model, T)
    U = h.U(Sigma)
    V = h.V(np.linalg.inv(terms.mho))
    s_hat = matfun.logdet_spd(Sigma) + float(np.trace(Sigma @ terms.Xi_T)) + terms.Ups_T
    # Tr chi(Omega) with Omega similar to Psi^2 Sigma, i.e. to U V
    s_tilde = float(np.sum(matfun.chi(matfun.sym_product_eigvals(Sigma, terms.Psi_sq)))) + terms.rho_T
    total = cov_supply(model, T, Sigma, Theta)
    scale = max(1.0, float(np.trace(U) + np.trace(V)))
    if abs(s_hat + s_tilde - total) > 1e-10 * scale:
        raise BridgeError(f"correction decomposition does not reproduce S_T: {s_hat + s_tilde!r} vs {total!r}")
    return s_hat, s_tilde
