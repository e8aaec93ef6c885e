import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entropic_bridge import matfun
from entropic_bridge.errors import ConditioningError, DomainError, ModelError, NotReachableError, ShapeError
from entropic_bridge.nominal import (
    GaussianState,
    SystemModel,
    checked_gramian,
    cov_semigroup,
    cov_semigroup_inverse,
    generator_cov,
    generator_mean,
    gramian,
    invariant_moments,
    mean_semigroup,
)
from entropic_bridge.problems import random_model, random_spd, scalar_model

LN2 = math.log(2.0)


def test_invariant_moments_examples():
    m = invariant_moments(scalar_model())
    assert m.alpha_star[0] == pytest.approx(0.0)
    assert m.Pi_star[0, 0] == pytest.approx(1.0)
    model = SystemModel(-np.eye(2), np.eye(2), [2.0, 0.0])
    np.testing.assert_allclose(model.alpha_star, [2.0, 0.0])
    np.testing.assert_allclose(model.Pi_star, np.eye(2) / 2, atol=1e-15)


def test_lyapunov_residual(rng):
    for n in (2, 3, 5):
        model = random_model(rng, n)
        P = model.Pi_star
        res = model.A @ P + P @ model.A.T + model.D
        assert np.linalg.norm(res) <= 1e-10 * np.linalg.norm(model.D)


def test_model_validation():
    with pytest.raises(ModelError):
        SystemModel([[0.1]], [[1.0]], [0.0])
    with pytest.raises(ModelError):
        SystemModel(-np.eye(2), [[1.0], [0.0]], [0.0, 0.0])
    with pytest.raises(ShapeError):
        SystemModel(-np.eye(2), np.eye(3), [0.0, 0.0])
    with pytest.raises(ShapeError):
        SystemModel(-np.eye(2), np.eye(2), [0.0])


def test_model_arrays_are_frozen():
    model = scalar_model()
    with pytest.raises(ValueError):
        model.A[0, 0] = 1.0


def test_gaussian_state_validation():
    with pytest.raises(Exception, match="Pi"):
        GaussianState([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ShapeError):
        GaussianState([0.0], np.eye(2))


def test_gramian_examples(rng):
    assert gramian(scalar_model(), LN2)[0, 0] == pytest.approx(0.75, rel=1e-14)
    model = random_model(rng, 3)
    G = gramian(model, 50 / model.decay_rate)
    np.testing.assert_allclose(G, model.Pi_star, atol=1e-10 * np.linalg.norm(model.Pi_star))
    G = gramian(model, 1e-3)
    np.testing.assert_allclose(G, model.D * 1e-3, rtol=1e-2, atol=1e-2 * 1e-3 * np.max(np.abs(model.D)))
    with pytest.raises(DomainError):
        gramian(model, 0.0)


def test_gramian_conditioning_guard():
    model = SystemModel(np.diag([-1.0, -1.0]), np.diag([1.0, 1e-7]), [0.0, 0.0])
    with pytest.raises(ConditioningError):
        checked_gramian(model, 1.0)


def test_mean_semigroup_examples(rng):
    model = random_model(rng, 3)
    a = rng.standard_normal(3)
    np.testing.assert_allclose(mean_semigroup(model, 0.0, a), a, rtol=1e-15, atol=1e-15)
    np.testing.assert_allclose(mean_semigroup(model, 1.3, model.alpha_star), model.alpha_star, atol=1e-14)
    assert mean_semigroup(scalar_model(), LN2, [1.0])[0] == pytest.approx(0.5)


def test_cov_semigroup_examples(rng):
    model = random_model(rng, 3)
    S = random_spd(rng, 3)
    np.testing.assert_allclose(cov_semigroup(model, 0.0, S), S, atol=1e-15)
    np.testing.assert_allclose(cov_semigroup(model, 2.0, model.Pi_star), model.Pi_star, atol=1e-13)
    assert cov_semigroup(scalar_model(), LN2, [[1.0]])[0, 0] == pytest.approx(1.0)


def test_cov_semigroup_inverse(rng):
    model = random_model(rng, 3)
    S0 = random_spd(rng, 3)
    T = 0.8
    Theta = gramian(model, T) + matfun.expm(model.A, T) @ S0 @ matfun.expm(model.A.T, T)
    np.testing.assert_allclose(cov_semigroup_inverse(model, T, Theta), S0, atol=1e-10)
    np.testing.assert_allclose(cov_semigroup_inverse(model, T, model.Pi_star), model.Pi_star, atol=1e-10)
    with pytest.raises(NotReachableError):
        cov_semigroup_inverse(model, T, gramian(model, T))


def test_generators(rng):
    model = random_model(rng, 3)
    np.testing.assert_allclose(generator_mean(model, model.alpha_star), 0.0, atol=1e-13)
    np.testing.assert_allclose(generator_cov(model, model.Pi_star), 0.0, atol=1e-12)
    S = random_spd(rng, 3)
    h = 1e-6
    fd = (cov_semigroup(model, h, S) - S) / h
    np.testing.assert_allclose(fd, generator_cov(model, S), atol=1e-4)


@settings(max_examples=25, deadline=None)
@given(s=st.floats(1e-3, 2.0), t=st.floats(1e-3, 2.0), seed=st.integers(0, 2**32 - 1))
def test_semigroup_and_gramian_recursion(s, t, seed):
    rng = np.random.default_rng(seed)
    model = random_model(rng, 3)
    S = random_spd(rng, 3)
    lhs = cov_semigroup(model, s + t, S)
    rhs = cov_semigroup(model, s, cov_semigroup(model, t, S))
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(lhs)
    E = matfun.expm(model.A, s)
    G = gramian(model, s) + E @ gramian(model, t) @ E.T
    assert np.linalg.norm(gramian(model, s + t) - G) <= 1e-10 * np.linalg.norm(G)


def test_gramian_monotone_and_reachable_set(rng):
    model = random_model(rng, 4)
    G1, G2 = gramian(model, 0.3), gramian(model, 1.1)
    assert matfun.is_pd(G2 - G1)
    assert matfun.is_pd(model.Pi_star - G2)
    for _ in range(10):
        S = random_spd(rng, 4)
        assert matfun.is_pd(cov_semigroup(model, 1.1, S) - G2)
