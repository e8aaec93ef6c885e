"""The nominal (zero noise-drift) linear system and its moment semigroups.

The system is ``dX = (mu + A X) dt + B dW`` with ``A`` Hurwitz and ``B``
of full row rank, so that the diffusion matrix ``D = B B^T`` is positive
definite.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import matfun
from .errors import ConditioningError, DomainError, ModelError, NotReachableError, ShapeError

HURWITZ_MARGIN = 1e-10
GRAMIAN_COND_MAX = 1e12


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Drift matrix ``A`` (n x n), noise gain ``B`` (n x m), constant drift ``mu``."""

    A: np.ndarray
    B: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        A = matfun.as_square(self.A, "A")
        n = A.shape[0]
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        if B.shape[0] != n:
            raise ShapeError(f"B must have {n} rows, got shape {B.shape}")
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        if mu.shape != (n,):
            raise ShapeError(f"mu must have length {n}, got {mu.shape[0]}")
        if not (np.all(np.isfinite(B)) and np.all(np.isfinite(mu))):
            raise ModelError("B and mu must be finite")
        top = np.max(np.linalg.eigvals(A).real)
        if top >= -HURWITZ_MARGIN:
            raise ModelError(f"A is not Hurwitz: max Re(eig A) = {top:.3e}")
        if B.shape[1] < n or np.linalg.matrix_rank(B) < n:
            raise ModelError(f"B must have rank n = {n} (shape {B.shape})")
        for name, value in (("A", A), ("B", B), ("mu", mu)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @cached_property
    def D(self) -> np.ndarray:
        return matfun.symmetrize(self.B @ self.B.T)

    @cached_property
    def alpha_star(self) -> np.ndarray:
        return -np.linalg.solve(self.A, self.mu)

    @cached_property
    def Pi_star(self) -> np.ndarray:
        return matfun.lyap_solve(self.A, self.D)

    @property
    def decay_rate(self) -> float:
        """``|Re lambda_max(A)|``, the slowest decay rate of the nominal dynamics."""
        return float(-np.max(np.linalg.eigvals(self.A).real))


@dataclass(frozen=True, eq=False)
class GaussianState:
    alpha: np.ndarray
    Pi: np.ndarray

    def __post_init__(self):
        Pi = matfun.as_spd(self.Pi, "Pi")
        alpha = np.asarray(self.alpha, dtype=float).reshape(-1)
        if alpha.shape != (Pi.shape[0],):
            raise ShapeError(f"alpha has length {alpha.size}, covariance is {Pi.shape}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "Pi", Pi)

    @property
    def n(self) -> int:
        return self.alpha.size


@dataclass(frozen=True, eq=False)
class NominalMoments:
    alpha_star: np.ndarray
    Pi_star: np.ndarray


def invariant_moments(model: SystemModel) -> NominalMoments:
    """Mean ``-A^{-1} mu`` and covariance (Lyapunov solution) of the invariant law."""
    if np.linalg.cond(model.A) > 1e14:
        raise ModelError("A is numerically singular")
    return NominalMoments(model.alpha_star.copy(), model.Pi_star.copy())


def gramian(model: SystemModel, t: float) -> np.ndarray:
    """Finite-horizon controllability Gramian ``Pi_* - e^{At} Pi_* e^{A^T t}``."""
    if not t > 0:
        raise DomainError(f"gramian needs t > 0, got {t}")
    E = matfun.expm(model.A, t)
    return matfun.symmetrize(model.Pi_star - E @ model.Pi_star @ E.T)


def checked_gramian(model: SystemModel, t: float) -> np.ndarray:
    """:func:`gramian` with the conditioning guard used before inverting it."""
    G = gramian(model, t)
    c = np.linalg.cond(G)
    if not c <= GRAMIAN_COND_MAX:
        raise ConditioningError(
            f"controllability Gramian over horizon {t:g} has condition number {c:.3e} > {GRAMIAN_COND_MAX:.0e}"
        )
    return G


def mean_semigroup(model: SystemModel, t: float, alpha) -> np.ndarray:
    if t < 0:
        raise DomainError(f"mean_semigroup needs t >= 0, got {t}")
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    if alpha.shape != (model.n,):
        raise ShapeError(f"alpha must have length {model.n}")
    a = model.alpha_star
    return a + matfun.expm(model.A, t) @ (alpha - a)


def cov_semigroup(model: SystemModel, t: float, Sigma) -> np.ndarray:
    if t < 0:
        raise DomainError(f"cov_semigroup needs t >= 0, got {t}")
    Sigma = matfun.as_spd(Sigma, "Sigma")
    if Sigma.shape != (model.n, model.n):
        raise ShapeError(f"Sigma must be {model.n} x {model.n}")
    if t == 0:
        return Sigma
    E = matfun.expm(model.A, t)
    P = model.Pi_star
    return matfun.symmetrize(P + E @ (Sigma - P) @ E.T)


def cov_semigroup_inverse(model: SystemModel, T: float, Theta) -> np.ndarray:
    """Initial covariance whose nominal image after time ``T`` is ``Theta``."""
    Theta = matfun.as_spd(Theta, "Theta")
    G = gramian(model, T)
    R = matfun.symmetrize(Theta - G)
    if not matfun.is_pd(R):
        raise NotReachableError("Theta - Gamma_T is not positive definite: Theta is not nominally reachable")
    Einv = matfun.expm(model.A, -T)
    return matfun.symmetrize(Einv @ R @ Einv.T)


def generator_mean(model: SystemModel, alpha) -> np.ndarray:
    return model.mu + model.A @ np.asarray(alpha, dtype=float)


def generator_cov(model: SystemModel, Sigma) -> np.ndarray:
    Sigma = np.asarray(Sigma, dtype=float)
    return matfun.symmetrize(model.A @ Sigma + Sigma @ model.A.T + model.D)
