"""Euler-Maruyama validation of the optimal strategy and relative-entropy bookkeeping.

Randomness is counter based: path ``i`` draws from a Philox stream with key
``seed`` and counter block ``i``, consuming the initial-state normals first
and then the step increments in time order. A path's noise therefore depends
only on ``(seed, i)``, and results are bit-identical for any worker count.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.integrate

from . import matfun
from .bridge import BridgeProblem
from .errors import ConfigError
from .nominal import GaussianState, SystemModel
from .strategy import StrategyPath

CHUNK = 512
CI_SIGMAS = 3.0


@dataclass(frozen=True)
class SimConfig:
    paths: int = 10_000
    dt: float | None = None
    seed: int = 42
    eps_term: float | None = None
    memory_budget: int = 2**31

    def resolved_dt(self, T: float) -> float:
        return T / 2048 if self.dt is None else float(self.dt)

    def validate(self, T: float, n: int) -> None:
        if int(self.paths) != self.paths or self.paths < 100:
            raise ConfigError(f"paths must be an integer >= 100, got {self.paths}")
        dt = self.resolved_dt(T)
        if not dt > 0:
            raise ConfigError(f"dt must be positive, got {dt}")
        if dt > T / 64 * (1 + 1e-12):
            raise ConfigError(f"dt = {dt:g} exceeds T/64 = {T / 64:g}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        steps = round(T / dt)
        if self.paths * n * steps * 8 > self.memory_budget:
            raise ConfigError("paths * n * steps exceeds the memory budget")


@dataclass(frozen=True, eq=False)
class SimResult:
    mean_hat: np.ndarray
    cov_hat: np.ndarray
    supply_hat: float
    supply_stderr: float
    mean_ci_halfwidth: np.ndarray
    cov_ci_halfwidth: np.ndarray
    paths: int
    steps: int
    elapsed: float


def worker_count() -> int:
    """Worker cap from ``EB_THREADS`` (0 or unset means one per CPU)."""
    try:
        k = int(os.environ.get("EB_THREADS", "0"))
    except ValueError:
        k = 0
    return k if k > 0 else (os.cpu_count() or 1)


def path_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, 0, int(index)]))


def _interp_nodes(path: StrategyPath, t: np.ndarray):
    """Piecewise-linear (beta, K, alpha) at times ``t``."""

    def lin(values):
        flat = values.reshape(values.shape[0], -1)
        out = np.empty((t.size, flat.shape[1]))
        for j in range(flat.shape[1]):
            out[:, j] = np.interp(t, path.times, flat[:, j])
        return out.reshape((t.size,) + values.shape[1:])

    return lin(path.beta), lin(path.K), lin(path.alpha)


def _simulate_chunk(model, sigma, seed, lo, hi, dt, beta, K, alpha):
    n, m = model.n, model.m
    steps = beta.shape[0]
    count = hi - lo
    z0 = np.empty((count, n))
    dW = np.empty((count, steps, m))
    for j in range(count):
        g = path_rng(seed, lo + j)
        z0[j] = g.standard_normal(n)
        dW[j] = g.standard_normal((steps, m))
    dW *= np.sqrt(dt)
    X = sigma.alpha + z0 @ np.linalg.cholesky(sigma.Pi).T
    supply = np.zeros(count)
    At, Bt = model.A.T, model.B.T
    for k in range(steps):
        h = beta[k] + (X - alpha[k]) @ K[k].T
        supply += np.einsum("ij,ij->i", h, h) * dt
        X = X + (model.mu + X @ At + h @ Bt) * dt + dW[:, k, :] @ Bt
    return X, supply


def simulate(problem: BridgeProblem, path: StrategyPath, config: SimConfig, workers: int | None = None) -> SimResult:
    """Simulate the closed loop ``dX = (mu + A X + B h) dt + B dW`` under ``h = beta + K (X - alpha)``.

    The strategy is read from ``path`` by piecewise-linear interpolation at
    the left end of each step; the number of steps is ``round(T / dt)``.
    ``supply_hat`` estimates ``(1/2) int E|h|^2 dt``.
    """
    T = problem.T
    config.validate(T, problem.n)
    steps = int(round(T / config.resolved_dt(T)))
    dt = T / steps
    t = np.arange(steps) * dt
    if t[-1] > path.times[-1] + 1e-12 * T:
        raise ConfigError(f"strategy path ends at {path.times[-1]:g}, simulation needs {t[-1]:g}")
    beta, K, alpha = _interp_nodes(path, t)

    start = time.perf_counter()
    N = int(config.paths)
    XT = np.empty((N, problem.n))
    supply = np.empty(N)
    bounds = [(lo, min(lo + CHUNK, N)) for lo in range(0, N, CHUNK)]

    def run(b):
        lo, hi = b
        XT[lo:hi], supply[lo:hi] = _simulate_chunk(
            problem.model, problem.sigma, config.seed, lo, hi, dt, beta, K, alpha
        )

    k = workers if workers is not None else worker_count()
    if k <= 1:
        for b in bounds:
            run(b)
    else:
        with ThreadPoolExecutor(max_workers=k) as pool:
            list(pool.map(run, bounds))

    mean_hat = XT.mean(axis=0)
    C = XT - mean_hat
    cov_hat = matfun.symmetrize(C.T @ C / (N - 1))
    prods = np.einsum("pi,pj->pij", C, C)
    cov_se = prods.std(axis=0, ddof=1) / np.sqrt(N)
    half = 0.5 * supply
    return SimResult(
        mean_hat=mean_hat,
        cov_hat=cov_hat,
        supply_hat=float(half.mean()),
        supply_stderr=float(half.std(ddof=1) / np.sqrt(N)),
        mean_ci_halfwidth=CI_SIGMAS * np.sqrt(np.diag(cov_hat) / N),
        cov_ci_halfwidth=CI_SIGMAS * cov_se,
        paths=N,
        steps=steps,
        elapsed=time.perf_counter() - start,
    )


def gaussian_relative_entropy(state: GaussianState, ref: GaussianState) -> float:
    """KL divergence ``D(state || ref)`` between two nondegenerate Gaussians, in nats."""
    if state.n != ref.n:
        raise ConfigError("states have different dimensions")
    d = state.alpha - ref.alpha
    P_ref_inv = np.linalg.inv(ref.Pi)
    return 0.5 * (
        matfun.logdet_spd(ref.Pi)
        - matfun.logdet_spd(state.Pi)
        + float(np.trace(P_ref_inv @ state.Pi))
        - state.n
        + float(d @ P_ref_inv @ d)
    )


def invariant_state(model: SystemModel) -> GaussianState:
    return GaussianState(model.alpha_star, model.Pi_star)


def relative_entropy_path(model: SystemModel, path: StrategyPath) -> np.ndarray:
    """State relative entropy ``R_t`` with respect to the invariant law, at every node."""
    ref = invariant_state(model)
    return np.array(
        [gaussian_relative_entropy(GaussianState(a, P), ref) for a, P in zip(path.alpha, path.Pi)]
    )


@dataclass(frozen=True)
class DissipationTerms:
    R0: float
    RT: float
    supply: float
    dissipated: float

    @property
    def residual(self) -> float:
        return abs(self.RT - self.R0 - self.supply + self.dissipated)


def dissipation_terms(problem: BridgeProblem, path: StrategyPath) -> DissipationTerms:
    """Storage increment, supply and dissipated term along an integrated bridge.

    The dissipated integrand is the Gaussian expectation
    ``|c|^2 + Tr(G Pi G^T)`` with ``c = beta - B^T Pi_*^{-1} (alpha - alpha_*)`` and
    ``G = K + B^T (Pi^{-1} - Pi_*^{-1})``; it is integrated by the trapezoidal rule
    over the path nodes.
    """
    model = problem.model
    B = model.B
    P_star_inv = np.linalg.inv(model.Pi_star)
    integrand = np.empty(len(path))
    for k in range(len(path)):
        c = path.beta[k] - B.T @ P_star_inv @ (path.alpha[k] - model.alpha_star)
        G = path.K[k] + B.T @ (np.linalg.inv(path.Pi[k]) - P_star_inv)
        integrand[k] = c @ c + np.trace(G @ path.Pi[k] @ G.T)
    R = relative_entropy_path(model, path)
    return DissipationTerms(
        R0=float(R[0]),
        RT=float(R[-1]),
        supply=0.5 * (path.mean_cost + path.cov_cost),
        dissipated=0.5 * float(scipy.integrate.trapezoid(integrand, path.times)),
    )


def dissipation_audit(problem: BridgeProblem, path: StrategyPath) -> float:
    """``|R_T - R_0 - E_T + dissipated|``; the equality case of the dissipation inequality.

    For an affine Markov strategy the residual should be at quadrature level,
    and the audit accepts ``residual <= 0.01 max(1, E_T)``.
    """
    return dissipation_terms(problem, path).residual
