"""Brute-force references that share no code path with the closed forms.

* :func:`brute_force_cov_supply` minimizes the covariance steering cost over
  piecewise-constant gains with a forward-Euler transcription and a
  quadratic terminal penalty.
* :func:`brute_force_mean_supply` solves the discretized least-norm problem
  for the mean drift exactly.
* :func:`markovization_gap_demo` compares the supply of the non-Markov
  strategy ``h_t = k X_0`` with that of its Markovization.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.optimize

from . import matfun
from .errors import ConfigError, OracleFailure, ShapeError, SolverError
from .nominal import SystemModel, mean_semigroup

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TranscriptionConfig:
    """Settings for the penalty-method transcription.

    ``method`` is ``"lbfgs"`` (quasi-Newton on the adjoint gradient) or
    ``"gd"`` (steepest descent with Armijo backtracking, parameters
    ``armijo`` and ``shrink``).
    """

    steps: int = 512
    penalty_schedule: tuple[float, ...] = (1e2, 1e4, 1e6)
    max_iters: int = 5000
    method: str = "lbfgs"
    armijo: float = 1e-4
    shrink: float = 0.5
    gtol: float = 1e-10

    def validate(self) -> None:
        if self.steps < 64:
            raise ConfigError(f"steps must be >= 64, got {self.steps}")
        s = np.asarray(self.penalty_schedule, dtype=float)
        if s.size == 0 or np.any(s <= 0) or np.any(np.diff(s) <= 0):
            raise ConfigError("penalty_schedule must be strictly increasing and positive")
        if self.method not in ("lbfgs", "gd"):
            raise ConfigError(f"unknown method {self.method!r}")


@dataclass
class OracleResult:
    cost: float
    terminal_violation: float
    iterations: list[int] = field(default_factory=list)


class _Transcription:
    """Forward-Euler covariance dynamics with gains ``K_0 .. K_{L-1}``."""

    def __init__(self, model: SystemModel, T: float, Sigma, Theta, steps: int):
        self.A, self.B, self.D = model.A, model.B, model.D
        self.n, self.m = model.n, model.m
        self.L = steps
        self.h = T / steps
        self.Sigma = matfun.as_spd(Sigma, "Sigma")
        self.Theta = matfun.as_spd(Theta, "Theta")

    def forward(self, K):
        Pis = np.empty((self.L + 1, self.n, self.n))
        Pis[0] = self.Sigma
        cost = 0.0
        for k in range(self.L):
            P, Kk = Pis[k], K[k]
            M = self.A + self.B @ Kk
            cost += self.h * np.trace(Kk @ P @ Kk.T)
            Pis[k + 1] = P + self.h * (M @ P + P @ M.T + self.D)
        return cost, Pis

    def objective(self, x, rho):
        K = x.reshape(self.L, self.m, self.n)
        cost, Pis = self.forward(K)
        R = Pis[-1] - self.Theta
        f = cost + rho * np.sum(R * R)
        # adjoint sweep
        grad = np.empty_like(K)
        Lam = 2.0 * rho * R
        for k in range(self.L - 1, -1, -1):
            P, Kk = Pis[k], K[k]
            M = self.A + self.B @ Kk
            grad[k] = 2.0 * self.h * (Kk @ P + self.B.T @ Lam @ P)
            Lam = Lam + self.h * (Kk.T @ Kk + M.T @ Lam + Lam @ M)
        return f, grad.ravel()


def _descend(obj, x0, cfg: TranscriptionConfig):
    if cfg.method == "lbfgs":
        res = scipy.optimize.minimize(
            obj, x0, jac=True, method="L-BFGS-B",
            options={"maxiter": cfg.max_iters, "gtol": cfg.gtol, "ftol": 1e-15, "maxcor": 30},
        )
        return res.x, int(res.nit)
    x = x0.copy()
    f, g = obj(x)
    step = 1.0
    for it in range(cfg.max_iters):
        gg = g @ g
        if np.sqrt(gg) < cfg.gtol:
            return x, it
        while True:
            xn = x - step * g
            fn, gn = obj(xn)
            if fn <= f - cfg.armijo * step * gg:
                break
            step *= cfg.shrink
            if step < 1e-20:
                return x, it
        x, f, g = xn, fn, gn
        step /= cfg.shrink
    return x, cfg.max_iters


def brute_force_cov_supply_result(model: SystemModel, T: float, Sigma, Theta, config: TranscriptionConfig | None = None) -> OracleResult:
    config = config or TranscriptionConfig()
    config.validate()
    if model.n > 3:
        raise ConfigError("the transcription oracle is limited to n <= 3")
    tr = _Transcription(model, T, Sigma, Theta, config.steps)
    x = np.zeros(tr.L * tr.m * tr.n)
    iters = []
    for rho in config.penalty_schedule:
        x, nit = _descend(lambda z: tr.objective(z, rho), x, config)
        iters.append(nit)
    cost, Pis = tr.forward(x.reshape(tr.L, tr.m, tr.n))
    violation = float(np.max(np.abs(Pis[-1] - tr.Theta)))
    if violation > 1e-3:
        raise OracleFailure(
            f"terminal violation {violation:.3e} > 1e-3 after penalty {config.penalty_schedule[-1]:g} "
            f"(cost {cost:.6g}, iterations {iters})"
        )
    return OracleResult(cost=float(cost), terminal_violation=violation, iterations=iters)


def brute_force_cov_supply(model: SystemModel, T: float, Sigma, Theta, config: TranscriptionConfig | None = None) -> float:
    """Minimum of ``int Tr(K Pi K^T) dt`` steering ``Sigma`` to ``Theta``, by direct transcription."""
    return brute_force_cov_supply_result(model, T, Sigma, Theta, config).cost


def discrete_mean_drift(model: SystemModel, T: float, alpha0, alphaT, L: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Least-norm piecewise-constant drift for the mean transfer.

    Minimizes ``sum |beta_k|^2 dt`` subject to
    ``sum Phi_k beta_k dt = alpha_T - M_T(alpha_0)``, where ``Phi_k`` is the
    interval average of ``e^{A (T - s)} B`` over ``[t_k, t_k + dt)``, i.e. the
    exact mean transfer for a drift held constant on each interval.
    Returns ``(midpoints, beta_k, cost)``.
    """
    if L < 256:
        raise ConfigError(f"L must be >= 256, got {L}")
    n = model.n
    dt = T / L
    t = (np.arange(L) + 0.5) * dt
    d = np.asarray(alphaT, dtype=float).reshape(-1) - mean_semigroup(model, T, alpha0)
    # expm([[A, I], [0, 0]] dt) carries int_0^dt e^{As} ds in its upper-right block
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = model.A
    aug[:n, n:] = np.eye(n)
    F = matfun.expm(aug, dt)
    step, avg = F[:n, :n], F[:n, n:] / dt
    cols = np.empty((L, n, model.m))
    Phi = avg @ model.B
    for k in range(L - 1, -1, -1):
        cols[k] = Phi
        Phi = step @ Phi
    Mat = np.sqrt(dt) * cols.transpose(1, 0, 2).reshape(model.n, L * model.m)
    if np.linalg.matrix_rank(Mat) < model.n:
        raise SolverError("mean transfer constraint is rank deficient")
    y = np.linalg.pinv(Mat) @ d
    beta = (y / np.sqrt(dt)).reshape(L, model.m)
    return t, beta, float(y @ y)


def brute_force_mean_supply(model: SystemModel, T: float, alpha0, alphaT, L: int = 4096) -> float:
    return discrete_mean_drift(model, T, alpha0, alphaT, L)[2]


@dataclass(frozen=True, eq=False)
class MarkovizationGap:
    raw_supply: float
    markovized_supply: float
    times: np.ndarray
    raw_integrand: np.ndarray
    markovized_integrand: np.ndarray


def _augmented_rhs(model: SystemModel, k: np.ndarray, S00: np.ndarray):
    A, B, D, n = model.A, model.B, model.D, model.n
    Bk = B @ k

    def rhs(t, y):
        St0 = y[: n * n].reshape(n, n)
        Stt = y[n * n :].reshape(n, n)
        dSt0 = A @ St0 + Bk @ S00
        dStt = A @ Stt + Stt @ A.T + Bk @ St0.T + St0 @ Bk.T + D
        return np.concatenate([dSt0.ravel(), dStt.ravel()])

    return rhs


def markovization_gap(model: SystemModel, T: float, k, Sigma0, alpha0=None, samples: int = 401) -> MarkovizationGap:
    """Supply of ``h_t = k X_0`` and of its Markovization ``k E(X_0 | X_t)``.

    The joint covariance of ``(X_0, X_t)`` follows linear ODEs, integrated
    with a high-order adaptive scheme; supplies are ``(1/2) int`` of the
    integrands ``|k a_0|^2 + Tr(k S00 k^T)`` and
    ``|k a_0|^2 + Tr(k S0t Stt^{-1} St0 k^T)``.
    """
    n = model.n
    k = np.atleast_2d(np.asarray(k, dtype=float))
    if k.shape != (model.m, n):
        raise ShapeError(f"k must be {model.m} x {n}, got {k.shape}")
    S00 = matfun.as_spd(Sigma0, "Sigma0")
    a0 = np.zeros(n) if alpha0 is None else np.asarray(alpha0, dtype=float)
    times = np.linspace(0.0, T, samples)
    y0 = np.concatenate([S00.ravel(), S00.ravel()])
    sol = scipy.integrate.solve_ivp(
        _augmented_rhs(model, k, S00), (0.0, T), y0, method="DOP853", t_eval=times, rtol=1e-12, atol=1e-14
    )
    if not sol.success:
        raise SolverError(f"moment ODE integration failed: {sol.message}")
    mean_term = float(np.sum((k @ a0) ** 2))
    raw = np.full(samples, mean_term + float(np.trace(k @ S00 @ k.T)))
    markov = np.empty(samples)
    for j in range(samples):
        St0 = sol.y[: n * n, j].reshape(n, n)
        Stt = matfun.symmetrize(sol.y[n * n :, j].reshape(n, n))
        kS = k @ St0.T
        markov[j] = mean_term + float(np.trace(kS @ np.linalg.solve(Stt, kS.T)))
    return MarkovizationGap(
        raw_supply=0.5 * float(scipy.integrate.simpson(raw, x=times)),
        markovized_supply=0.5 * float(scipy.integrate.simpson(markov, x=times)),
        times=times,
        raw_integrand=raw,
        markovized_integrand=markov,
    )


def markovization_gap_demo(model: SystemModel, T: float, gain_on_initial_state, Sigma0, alpha0=None) -> tuple[float, float]:
    """``(raw_supply, markovized_supply)``; raises if the Markovization increased the supply."""
    gap = markovization_gap(model, T, gain_on_initial_state, Sigma0, alpha0)
    if gap.raw_supply - gap.markovized_supply < -1e-12 * max(1.0, gap.raw_supply):
        raise SolverError(
            f"markovized supply {gap.markovized_supply!r} exceeds raw supply {gap.raw_supply!r}"
        )
    return gap.raw_supply, gap.markovized_supply


@dataclass(frozen=True)
class MarkovizationMonteCarlo:
    raw_supply: float
    raw_stderr: float
    markovized_supply: float
    markovized_stderr: float


def markovization_monte_carlo(
    model: SystemModel, T: float, k, Sigma0, alpha0=None, paths: int = 10_000, steps: int = 512,
    seed: int = 42, batches: int = 20,
) -> MarkovizationMonteCarlo:
    """Sample-based estimate of both supplies for ``h_t = k X_0``.

    The Markovized integrand at each time is the mean square of the linear
    regression of ``k X_0`` on ``X_t``; standard errors come from ``batches``
    disjoint path batches.
    """
    n, m = model.n, model.m
    k = np.atleast_2d(np.asarray(k, dtype=float))
    S00 = matfun.as_spd(Sigma0, "Sigma0")
    a0 = np.zeros(n) if alpha0 is None else np.asarray(alpha0, dtype=float)
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    X0 = a0 + rng.standard_normal((paths, n)) @ np.linalg.cholesky(S00).T
    h = X0 @ k.T
    dt = T / steps
    X = X0.copy()
    drift_h = h @ model.B.T
    per_batch = np.array_split(np.arange(paths), batches)
    raw_b = np.zeros(batches)
    mk_b = np.zeros(batches)
    hh = np.einsum("ij,ij->i", h, h)

    def accumulate(X, weight):
        for b, idx in enumerate(per_batch):
            raw_b[b] += weight * hh[idx].mean()
            Z = np.column_stack([np.ones(idx.size), X[idx]])
            coef, *_ = np.linalg.lstsq(Z, h[idx], rcond=None)
            fit = Z @ coef
            mk_b[b] += weight * np.einsum("ij,ij->i", fit, fit).mean()

    for s in range(steps + 1):
        accumulate(X, dt * (0.5 if s in (0, steps) else 1.0))
        if s == steps:
            break
        dW = rng.standard_normal((paths, m)) * np.sqrt(dt)
        X = X + (model.mu + X @ model.A.T + drift_h) * dt + dW @ model.B.T
    raw_b *= 0.5
    mk_b *= 0.5
    return MarkovizationMonteCarlo(
        raw_supply=float(raw_b.mean()),
        raw_stderr=float(raw_b.std(ddof=1) / np.sqrt(batches)),
        markovized_supply=float(mk_b.mean()),
        markovized_stderr=float(mk_b.std(ddof=1) / np.sqrt(batches)),
    )
