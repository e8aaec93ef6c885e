"""Benchmark and randomized problem generators used by tests, the CLI and the acceptance suite."""

from __future__ import annotations

import math

import numpy as np

from .bridge import BridgeProblem
from .nominal import GaussianState, SystemModel, cov_semigroup, mean_semigroup


def scalar_model() -> SystemModel:
    """``dX = -X dt + sqrt(2) dW``: invariant law N(0, 1)."""
    return SystemModel(np.array([[-1.0]]), np.array([[math.sqrt(2.0)]]), np.zeros(1))


def scalar_benchmark() -> BridgeProblem:
    """N(0, 1) -> N(1, 2) over ``T = ln 2`` for the scalar model.

    Gramian 3/4, mean part 4/3, covariance part ~0.33408, total ~0.83371.
    """
    return BridgeProblem(
        scalar_model(),
        math.log(2.0),
        GaussianState([0.0], [[1.0]]),
        GaussianState([1.0], [[2.0]]),
    )


def random_spd(rng: np.random.Generator, n: int, lo: float = 0.3, hi: float = 3.0) -> np.ndarray:
    """SPD matrix with eigenvalues drawn uniformly from ``[lo, hi]``."""
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    w = rng.uniform(lo, hi, size=n)
    P = (Q * w) @ Q.T
    return 0.5 * (P + P.T)


def random_model(rng: np.random.Generator, n: int, m: int | None = None) -> SystemModel:
    """Random Hurwitz ``A`` (spectral abscissa in [-1.5, -0.2]) and well-conditioned ``B``.

    The singular values of ``B`` lie in ``[0.5, 1.5]``, so ``cond(D) <= 9``.
    """
    if m is None:
        m = n + int(rng.integers(0, 2))
    R = rng.standard_normal((n, n)) * 0.6
    shift = np.max(np.linalg.eigvals(R).real) + rng.uniform(0.2, 1.5)
    A = R - shift * np.eye(n)
    Ul, _ = np.linalg.qr(rng.standard_normal((n, n)))
    Vr, _ = np.linalg.qr(rng.standard_normal((m, m)))
    s = rng.uniform(0.5, 1.5, size=n)
    B = (Ul * s) @ Vr[:n, :]
    mu = rng.standard_normal(n) * 0.5
    return SystemModel(A, B, mu)


def random_problem(
    rng: np.random.Generator, n: int, T: float | None = None, T_range: tuple[float, float] = (0.1, 3.0)
) -> BridgeProblem:
    model = random_model(rng, n)
    if T is None:
        T = float(rng.uniform(*T_range))
    sigma = GaussianState(rng.standard_normal(n), random_spd(rng, n))
    theta = GaussianState(rng.standard_normal(n), random_spd(rng, n))
    return BridgeProblem(model, T, sigma, theta)


def nominal_endpoint(problem: BridgeProblem) -> BridgeProblem:
    """Same problem with the terminal law replaced by the nominal image of the initial one."""
    m, T, s = problem.model, problem.T, problem.sigma
    theta = GaussianState(mean_semigroup(m, T, s.alpha), cov_semigroup(m, T, s.Pi))
    return BridgeProblem(m, T, s, theta)
