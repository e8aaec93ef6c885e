"""Optimal affine noise strategy and the closed-loop moment bridge.

The optimal strategy is ``h_t = beta_t + K_t (X_t - alpha_t)``. The mean drift
``beta_t`` is explicit. The gain uses the remaining horizon,
``K_t = -B^T d_Sigma S_{T-t}(Pi_t, Theta)``, and so becomes stiff as
``t -> T``. Integration therefore stops at ``T - eps_term``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import matfun
from .bridge import BridgeProblem, grad_S_sigma
from .errors import ConfigError, DomainError, StepSizeError, TerminalLayerError
from .nominal import (
    checked_gramian,
    cov_semigroup,
    cov_semigroup_inverse,
    generator_cov,
    generator_mean,
    mean_semigroup,
)

log = logging.getLogger(__name__)

DEFAULT_STEPS = 512
UNIFORM_FRACTION = 0.9
GEOMETRIC_RATIO = 0.5
SUBSTEPS_PER_LAYER = 4
MAX_RETRIES = 3


def default_eps_term(T: float) -> float:
    return 1e-6 * T


@dataclass(frozen=True, eq=False)
class StrategyPath:
    """Time-gridded optimal strategy and closed-loop moments.

    Arrays are indexed by node: ``alpha[k]`` is an n-vector, ``Pi[k]`` n x n,
    ``beta[k]`` an m-vector, ``K[k]`` m x n. ``cum_mean_cost`` and
    ``cum_cov_cost`` accumulate ``|beta|^2`` and ``Tr(K Pi K^T)`` from 0.
    """

    times: np.ndarray
    alpha: np.ndarray
    Pi: np.ndarray
    beta: np.ndarray
    K: np.ndarray
    cum_mean_cost: np.ndarray
    cum_cov_cost: np.ndarray
    eps_term: float
    terminal_cov_error: float
    terminal_mean_error: float

    @property
    def mean_cost(self) -> float:
        return float(self.cum_mean_cost[-1])

    @property
    def cov_cost(self) -> float:
        return float(self.cum_cov_cost[-1])

    def __len__(self) -> int:
        return self.times.size


def _mean_direction(problem: BridgeProblem) -> np.ndarray:
    m = problem.model
    G = checked_gramian(m, problem.T)
    d = problem.theta.alpha - mean_semigroup(m, problem.T, problem.sigma.alpha)
    return scipy.linalg.cho_solve(scipy.linalg.cho_factor(G), d)


def optimal_mean_drift(problem: BridgeProblem, t: float) -> np.ndarray:
    """``beta_t = B^T e^{A^T (T-t)} Gamma_T^{-1} (alpha_T - M_T(alpha_0))``."""
    if not 0.0 <= t <= problem.T:
        raise DomainError(f"t must lie in [0, T], got {t}")
    m = problem.model
    return m.B.T @ matfun.expm(m.A.T, problem.T - t) @ _mean_direction(problem)


def optimal_gain(problem: BridgeProblem, t: float, Pi_t, eps_term: float | None = None) -> np.ndarray:
    """Feedback gain ``K = -B^T d_Sigma S_{T-t}(Pi_t, Theta)``."""
    if eps_term is None:
        eps_term = default_eps_term(problem.T)
    remaining = problem.T - t
    if not remaining > eps_term * (1.0 - 1e-9):
        raise TerminalLayerError(f"remaining horizon {remaining:.3e} is inside the terminal layer {eps_term:.3e}")
    grad = grad_S_sigma(problem.model, remaining, Pi_t, problem.theta.Pi)
    return -problem.model.B.T @ grad


def time_grid(T: float, steps: int, eps_term: float) -> np.ndarray:
    """Uniform nodes on ``[0, 0.9 T]`` followed by a geometric approach to ``T - eps_term``.

    Each geometric layer ``[T - r, T - r/2]`` is split into
    ``SUBSTEPS_PER_LAYER`` equal steps, scaled up with ``steps``.
    """
    uniform = np.linspace(0.0, UNIFORM_FRACTION * T, steps + 1)
    sub = max(SUBSTEPS_PER_LAYER, SUBSTEPS_PER_LAYER * steps // DEFAULT_STEPS)
    pieces = [uniform]
    r = (1.0 - UNIFORM_FRACTION) * T
    while r > eps_term:
        r_next = max(r * GEOMETRIC_RATIO, eps_term)
        pieces.append(np.linspace(T - r, T - r_next, sub + 1)[1:])
        r = r_next
    return np.concatenate(pieces)


def _integrate(problem: BridgeProblem, grid: np.ndarray, eps_term: float):
    model = problem.model
    B = model.B
    n, m = model.n, model.m
    direction = _mean_direction(problem)
    Theta = problem.theta.Pi

    def controls(t, Pi):
        beta = B.T @ matfun.expm(model.A.T, problem.T - t) @ direction
        K = optimal_gain(problem, t, Pi, eps_term)
        return beta, K

    def rhs(t, alpha, Pi):
        if not matfun.is_pd(Pi):
            raise StepSizeError(f"covariance lost positive definiteness at t = {t:.6g}")
        beta, K = controls(t, Pi)
        BK = B @ K
        d_alpha = generator_mean(model, alpha) + B @ beta
        d_Pi = generator_cov(model, Pi) + BK @ Pi + Pi @ BK.T
        return d_alpha, matfun.symmetrize(d_Pi), float(beta @ beta), float(np.trace(K @ Pi @ K.T))

    N = grid.size
    alphas = np.empty((N, n))
    Pis = np.empty((N, n, n))
    betas = np.empty((N, m))
    Ks = np.empty((N, m, n))
    cm = np.zeros(N)
    cc = np.zeros(N)
    alpha = problem.sigma.alpha.copy()
    Pi = problem.sigma.Pi.copy()
    for k in range(N):
        t = grid[k]
        alphas[k], Pis[k] = alpha, Pi
        betas[k], Ks[k] = controls(t, Pi)
        if k == N - 1:
            break
        h = grid[k + 1] - t
        a1, P1, m1, c1 = rhs(t, alpha, Pi)
        a2, P2, m2, c2 = rhs(t + h / 2, alpha + h / 2 * a1, matfun.symmetrize(Pi + h / 2 * P1))
        a3, P3, m3, c3 = rhs(t + h / 2, alpha + h / 2 * a2, matfun.symmetrize(Pi + h / 2 * P2))
        a4, P4, m4, c4 = rhs(t + h, alpha + h * a3, matfun.symmetrize(Pi + h * P3))
        alpha = alpha + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        Pi = matfun.symmetrize(Pi + h / 6 * (P1 + 2 * P2 + 2 * P3 + P4))
        cm[k + 1] = cm[k] + h / 6 * (m1 + 2 * m2 + 2 * m3 + m4)
        cc[k + 1] = cc[k] + h / 6 * (c1 + 2 * c2 + 2 * c3 + c4)
        if not matfun.is_pd(Pi):
            raise StepSizeError(f"covariance lost positive definiteness at t = {grid[k + 1]:.6g}")
    return alphas, Pis, betas, Ks, cm, cc


def integrate_bridge(problem: BridgeProblem, steps: int = DEFAULT_STEPS, eps_term: float | None = None) -> StrategyPath:
    """Integrate the closed-loop mean and covariance ODEs with classical RK4.

    Parameters
    ----------
    problem : BridgeProblem
    steps : int
        Number of uniform steps on ``[0, 0.9 T]`` (at least 16).
    eps_term : float, optional
        Width of the terminal layer left unintegrated; default ``1e-6 T``.

    Returns
    -------
    StrategyPath
        Nodes on ``[0, T - eps_term]``. ``terminal_cov_error`` is the relative
        Frobenius distance between the last covariance and ``Theta`` pulled
        back through the nominal flow over ``eps_term``.

    Raises
    ------
    StepSizeError
        If the covariance leaves the positive definite cone even after
        ``MAX_RETRIES`` step halvings.
    """
    if steps < 16:
        raise ConfigError(f"steps must be >= 16, got {steps}")
    T = problem.T
    if eps_term is None:
        eps_term = default_eps_term(T)
    if not 0.0 < eps_term < 0.01 * T:
        raise ConfigError(f"eps_term must lie in (0, 0.01 T), got {eps_term}")

    for attempt in range(MAX_RETRIES + 1):
        grid = time_grid(T, steps * 2**attempt, eps_term)
        try:
            alphas, Pis, betas, Ks, cm, cc = _integrate(problem, grid, eps_term)
            break
        except StepSizeError as exc:
            log.warning("integration attempt %d failed (%s); halving step", attempt, exc)
            if attempt == MAX_RETRIES:
                raise

    model = problem.model
    target = cov_semigroup_inverse(model, eps_term, problem.theta.Pi)
    cov_err = float(np.linalg.norm(Pis[-1] - target) / np.linalg.norm(target))
    mean_err = float(np.linalg.norm(mean_semigroup(model, eps_term, alphas[-1]) - problem.theta.alpha))
    return StrategyPath(
        times=grid,
        alpha=alphas,
        Pi=Pis,
        beta=betas,
        K=Ks,
        cum_mean_cost=cm,
        cum_cov_cost=cc,
        eps_term=eps_term,
        terminal_cov_error=cov_err,
        terminal_mean_error=mean_err,
    )


def nominal_path(problem: BridgeProblem, steps: int = DEFAULT_STEPS) -> StrategyPath:
    """Zero strategy from ``problem.sigma``, with exact moments on a uniform grid over ``[0, T]``."""
    model, T = problem.model, problem.T
    times = np.linspace(0.0, T, steps + 1)
    alphas = np.array([mean_semigroup(model, t, problem.sigma.alpha) for t in times])
    Pis = np.array([cov_semigroup(model, t, problem.sigma.Pi) for t in times])
    zeros = np.zeros(times.size)
    return StrategyPath(
        times=times,
        alpha=alphas,
        Pi=Pis,
        beta=np.zeros((times.size, model.m)),
        K=np.zeros((times.size, model.m, model.n)),
        cum_mean_cost=zeros,
        cum_cov_cost=zeros.copy(),
        eps_term=0.0,
        terminal_cov_error=float(np.linalg.norm(Pis[-1] - problem.theta.Pi) / np.linalg.norm(problem.theta.Pi)),
        terminal_mean_error=float(np.linalg.norm(alphas[-1] - problem.theta.alpha)),
    )
