"""Minimum relative-entropy noise supply for linear-Gaussian diffusions."""

from .bridge import (
    BridgeProblem,
    SupplyBreakdown,
    correction_decomposition,
    cov_supply,
    grad_S_sigma,
    hje_residual,
    mean_supply,
    total_supply,
)
from .errors import BridgeError
from .montecarlo import SimConfig, SimResult, dissipation_audit, gaussian_relative_entropy, simulate
from .nominal import GaussianState, SystemModel, cov_semigroup, gramian, mean_semigroup
from .oracle import brute_force_cov_supply, brute_force_mean_supply, markovization_gap_demo
from .strategy import StrategyPath, integrate_bridge

__all__ = [
    "BridgeError",
    "BridgeProblem",
    "GaussianState",
    "SimConfig",
    "SimResult",
    "StrategyPath",
    "SupplyBreakdown",
    "SystemModel",
    "brute_force_cov_supply",
    "brute_force_mean_supply",
    "correction_decomposition",
    "cov_semigroup",
    "cov_supply",
    "dissipation_audit",
    "gaussian_relative_entropy",
    "grad_S_sigma",
    "gramian",
    "hje_residual",
    "integrate_bridge",
    "markovization_gap_demo",
    "mean_semigroup",
    "mean_supply",
    "simulate",
    "total_supply",
]
__version__ = "0.1.0"
