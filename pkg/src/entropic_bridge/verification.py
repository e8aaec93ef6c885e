"""Numerical checks of the closed-form solution, shared by the CLI and the test suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bridge, montecarlo, oracle, strategy
from .bridge import BridgeProblem
from .nominal import GaussianState, cov_semigroup
from .problems import random_problem

BOUNDARY_TOL = 1e-8
HJE_TOL = 1e-5
GRADIENT_TOL = 1e-6
ORACLE_COV_RTOL = 1e-2
ORACLE_MEAN_RTOL = 1e-4
DISSIPATION_RTOL = 1e-2


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def fd_gradient(model, T, Sigma, Theta, f=bridge.cov_supply) -> np.ndarray:
    """Central finite-difference gradient of ``f`` over symmetric perturbations.

    Off-diagonal entries perturb ``(i, j)`` and ``(j, i)`` together, so the
    difference quotient is halved to match ``dS = Tr(G dSigma)``. Step
    ``1e-6 max(1, ||Sigma||_2)``.
    """
    Sigma = np.asarray(Sigma, dtype=float)
    n = Sigma.shape[0]
    h = 1e-6 * max(1.0, np.linalg.norm(Sigma, 2))
    G = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            E[i, j] = E[j, i] = 1.0
            q = (f(model, T, Sigma + h * E, Theta) - f(model, T, Sigma - h * E, Theta)) / (2 * h)
            G[i, j] = G[j, i] = q if i == j else q / 2
    return G


def gradient_error(model, T, Sigma, Theta) -> float:
    """Max entrywise deviation of the analytic gradient from finite differences,
    relative to the largest finite-difference entry."""
    g = bridge.grad_S_sigma(model, T, Sigma, Theta)
    f = fd_gradient(model, T, Sigma, Theta)
    return float(np.max(np.abs(g - f)) / max(np.max(np.abs(f)), 1e-300))


def check_boundary(problem: BridgeProblem, random_count: int = 20, seed: int = 0) -> Check:
    m, T, S = problem.model, problem.T, problem.sigma.Pi
    worst = abs(bridge.cov_supply(m, T, S, cov_semigroup(m, T, S)))
    rng = np.random.default_rng(seed)
    for i in range(random_count):
        p = random_problem(rng, 1 + i % 5)
        q = p.sigma.Pi
        worst = max(worst, abs(bridge.cov_supply(p.model, p.T, q, cov_semigroup(p.model, p.T, q))))
    return Check("boundary", worst <= BOUNDARY_TOL, f"max |S_T(Sigma, C_T(Sigma))| = {worst:.3e} over {random_count + 1} problems")


def check_hje(problem: BridgeProblem) -> Check:
    args = (problem.model, problem.T, problem.sigma.Pi, problem.theta.Pi)
    full = bridge.hje_residual(*args)
    hat = bridge.hje_residual(*args, part="hat")
    ok = full <= HJE_TOL and hat <= HJE_TOL
    return Check("hje", ok, f"residual {full:.3e} (starting solution alone {hat:.3e})")


def check_gradient(problem: BridgeProblem) -> Check:
    err = gradient_error(problem.model, problem.T, problem.sigma.Pi, problem.theta.Pi)
    return Check("gradient", err <= GRADIENT_TOL, f"max relative deviation from finite differences {err:.3e}")


def check_oracle(problem: BridgeProblem, config: oracle.TranscriptionConfig | None = None) -> Check:
    m, T = problem.model, problem.T
    if m.n > 3:
        return Check("oracle", False, "transcription oracle only supports n <= 3")
    closed = bridge.cov_supply(m, T, problem.sigma.Pi, problem.theta.Pi)
    brute = oracle.brute_force_cov_supply(m, T, problem.sigma.Pi, problem.theta.Pi, config)
    mean_closed = bridge.mean_supply(m, T, problem.sigma.alpha, problem.theta.alpha)
    mean_brute = oracle.brute_force_mean_supply(m, T, problem.sigma.alpha, problem.theta.alpha, 4096)
    cov_gap = abs(brute - closed) / max(abs(closed), 1e-12)
    mean_gap = abs(mean_brute - mean_closed) / max(abs(mean_closed), 1e-12)
    # zero targets: compare absolutely
    cov_ok = cov_gap <= ORACLE_COV_RTOL or abs(brute - closed) <= 1e-4
    mean_ok = mean_gap <= ORACLE_MEAN_RTOL or abs(mean_brute - mean_closed) <= 1e-12
    return Check(
        "oracle",
        cov_ok and mean_ok,
        f"cov {brute:.6g} vs {closed:.6g} (gap {cov_gap:.2e}); mean {mean_brute:.8g} vs {mean_closed:.8g} (gap {mean_gap:.2e})",
    )


def second_law(problem: BridgeProblem) -> tuple[bool, float]:
    """Nominal evolution from each endpoint law: is ``R_t`` non-increasing?

    Both ``sigma`` and ``theta`` are used as starting laws, so at least one
    start is non-invariant unless the problem is invariant-to-invariant.
    Returns the verdict and the largest single-step increase.
    """
    ok, worst = True, 0.0
    for start in (problem.sigma, problem.theta):
        p = BridgeProblem(problem.model, problem.T, start, start)
        R = montecarlo.relative_entropy_path(problem.model, strategy.nominal_path(p))
        rise = float(np.max(np.diff(R), initial=0.0))
        ok = ok and rise <= 1e-9 * max(1.0, R[0])
        worst = max(worst, rise)
    return ok, worst


def check_dissipation(problem: BridgeProblem) -> Check:
    path = strategy.integrate_bridge(problem)
    terms = montecarlo.dissipation_terms(problem, path)
    tol = DISSIPATION_RTOL * max(1.0, terms.supply)
    law_ok, rise = second_law(problem)
    return Check(
        "dissipation",
        terms.residual <= tol and law_ok,
        f"residual {terms.residual:.3e} (tolerance {tol:.3e}); nominal R_t max step increase {rise:.2e}",
    )


def default_gain(problem: BridgeProblem) -> np.ndarray:
    """Gain ``k = B^T Pi_*^{-1}`` used for the Markovization demonstration."""
    m = problem.model
    return m.B.T @ np.linalg.inv(m.Pi_star)


def check_markov(problem: BridgeProblem) -> Check:
    m = problem.model
    raw, mk = oracle.markovization_gap_demo(m, problem.T, default_gain(problem), problem.sigma.Pi, problem.sigma.alpha)
    return Check("markov", raw - mk > 0, f"raw supply {raw:.6g} > markovized {mk:.6g}")


CHECKS = {
    "hje": check_hje,
    "boundary": check_boundary,
    "gradient": check_gradient,
    "oracle": check_oracle,
    "dissipation": check_dissipation,
    "markov": check_markov,
}


def run_checks(problem: BridgeProblem, which: str = "all") -> list[Check]:
    names = list(CHECKS) if which == "all" else [which]
    return [CHECKS[name](problem) for name in names]


def invariant_problem(problem: BridgeProblem) -> BridgeProblem:
    """Invariant-to-invariant transfer for the same model and horizon."""
    m = problem.model
    inv = GaussianState(m.alpha_star, m.Pi_star)
    return BridgeProblem(m, problem.T, inv, inv)
