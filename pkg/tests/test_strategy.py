import numpy as np
import pytest

from entropic_bridge import bridge, strategy
from entropic_bridge.errors import ConfigError, DomainError, TerminalLayerError
from entropic_bridge.problems import nominal_endpoint, random_problem


@pytest.fixture(scope="module")
def scalar_path(scalar):
    return strategy.integrate_bridge(scalar)


def test_time_grid_structure():
    T, eps = 2.0, 2e-6
    g = strategy.time_grid(T, 64, eps)
    assert g[0] == 0.0
    assert g[-1] == pytest.approx(T - eps, rel=1e-15)
    assert np.all(np.diff(g) > 0)
    np.testing.assert_allclose(g[:65], np.linspace(0, 0.9 * T, 65))
    # steps shrink geometrically toward the end
    assert np.diff(g)[-1] < 1e-3 * np.diff(g)[0]


def test_scalar_reaches_target(scalar, scalar_path):
    path = scalar_path
    assert len(path) == path.times.size == path.Pi.shape[0]
    assert path.terminal_cov_error <= 1e-3
    assert path.Pi[-1, 0, 0] == pytest.approx(2.0, rel=1e-5)
    assert path.alpha[-1, 0] == pytest.approx(1.0, rel=1e-5)
    s = bridge.total_supply(scalar)
    assert path.cov_cost == pytest.approx(s.cov_part, rel=5e-3)
    assert path.mean_cost == pytest.approx(s.mean_part, rel=5e-3)
    assert np.all(np.linalg.eigvalsh(path.Pi) > 0)


def test_gain_sign_inflates_covariance(scalar):
    # Theta = 2 > C_T(1) = 1: the gain must push the covariance up
    K0 = strategy.optimal_gain(scalar, 0.0, scalar.sigma.Pi)
    assert K0[0, 0] > 0


def test_mean_drift_closed_form(scalar):
    # scalar: beta_t = sqrt(2) e^{-(T-t)} / (3/4)
    for t in (0.0, 0.3, scalar.T):
        expected = np.sqrt(2) * np.exp(-(scalar.T - t)) / 0.75
        assert strategy.optimal_mean_drift(scalar, t)[0] == pytest.approx(expected, rel=1e-13)
    with pytest.raises(DomainError):
        strategy.optimal_mean_drift(scalar, scalar.T + 1)


def test_terminal_layer(scalar):
    eps = 1e-3
    with pytest.raises(TerminalLayerError):
        strategy.optimal_gain(scalar, scalar.T - eps / 2, scalar.sigma.Pi, eps)


def test_nominal_endpoint_is_free(rng):
    p = nominal_endpoint(random_problem(rng, 2))
    path = strategy.integrate_bridge(p, steps=128)
    assert np.max(np.abs(path.beta)) <= 1e-10
    assert np.max(np.abs(path.K)) <= 1e-5
    assert path.mean_cost <= 1e-12
    assert path.cov_cost <= 1e-8


def test_random_2d_reachability(random_2d):
    for p in random_2d[:2]:
        path = strategy.integrate_bridge(p)
        assert path.terminal_cov_error <= 1e-3
        s = bridge.total_supply(p)
        assert path.cov_cost == pytest.approx(s.cov_part, rel=5e-3)
        assert path.mean_cost == pytest.approx(s.mean_part, rel=5e-3, abs=1e-12)


def test_dynamic_programming_consistency(random_2d):
    p = random_2d[0]
    path = strategy.integrate_bridge(p)
    S0 = bridge.cov_supply(p.model, p.T, p.sigma.Pi, p.theta.Pi)
    for k in range(0, len(path) - 40, 50):
        t = path.times[k]
        remaining = bridge.cov_supply(p.model, p.T - t, path.Pi[k], p.theta.Pi)
        assert remaining + path.cum_cov_cost[k] == pytest.approx(S0, rel=5e-3)


def test_cost_converges_under_refinement(random_2d):
    p = random_2d[1]
    # the limit excludes the cost of the unintegrated terminal layer (O(eps_term)),
    # so the order is read from successive refinements
    costs = [strategy.integrate_bridge(p, steps=s).cov_cost for s in (32, 64, 128, 256)]
    d = np.abs(np.diff(costs))
    assert np.all(d[1:] < d[:-1])
    assert np.log2(d[1] / d[2]) >= 1.0


def test_config_errors(scalar):
    with pytest.raises(ConfigError):
        strategy.integrate_bridge(scalar, steps=8)
    with pytest.raises(ConfigError):
        strategy.integrate_bridge(scalar, eps_term=0.1)
    with pytest.raises(ConfigError):
        strategy.integrate_bridge(scalar, eps_term=0.0)


def test_nominal_path(scalar):
    p = strategy.nominal_path(scalar, steps=64)
    assert len(p) == 65
    assert p.cov_cost == 0.0 and p.mean_cost == 0.0
    np.testing.assert_allclose(p.Pi[:, 0, 0], 1.0)
