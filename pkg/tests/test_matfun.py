import math

import numpy as np
import pytest
import scipy.integrate
from hypothesis import given, settings
from hypothesis import strategies as st

from entropic_bridge import matfun
from entropic_bridge.errors import DomainError, NotPositiveDefiniteError, PositivityViolation, ShapeError, SolverError
from entropic_bridge.problems import random_model, random_spd


def test_expm_examples():
    A = np.array([[0.3, -1.2], [2.0, 0.1]])
    assert np.array_equal(matfun.expm(A, 0.0), np.eye(2))
    N = np.array([[0.0, 1.0], [0.0, 0.0]])
    np.testing.assert_allclose(matfun.expm(N, 1.7), [[1.0, 1.7], [0.0, 1.0]], atol=1e-15)
    assert matfun.expm([[-1.0]], math.log(2))[0, 0] == pytest.approx(0.5, rel=1e-15)


def test_expm_rejects_non_square():
    with pytest.raises(ShapeError):
        matfun.expm(np.ones((2, 3)))


@settings(max_examples=30, deadline=None)
@given(s=st.floats(-2, 2), t=st.floats(-2, 2), seed=st.integers(0, 2**32 - 1))
def test_expm_semigroup(s, t, seed):
    A = np.random.default_rng(seed).standard_normal((3, 3))
    lhs = matfun.expm(A, s + t)
    rhs = matfun.expm(A, s) @ matfun.expm(A, t)
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(lhs)


def test_sqrtm_examples():
    np.testing.assert_array_equal(matfun.sqrtm_spd(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(matfun.sqrtm_spd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-15)
    with pytest.raises(NotPositiveDefiniteError):
        matfun.sqrtm_spd(np.diag([1.0, -1.0]))


@pytest.mark.parametrize("n", [1, 2, 4, 6])
def test_sqrtm_idempotence(rng, n):
    X = random_spd(rng, n)
    R = matfun.sqrtm_spd(X @ X)
    np.testing.assert_allclose(R, X, atol=1e-10 * np.linalg.norm(X))
    np.testing.assert_allclose(matfun.inv_sqrtm_spd(X) @ matfun.sqrtm_spd(X), np.eye(n), atol=1e-10)


def test_logdet_examples():
    assert matfun.logdet_spd(np.eye(4)) == 0.0
    assert abs(matfun.logdet_spd(np.diag([2.0, 0.5]))) < 1e-15
    assert matfun.logdet_spd(2 * np.eye(3)) == pytest.approx(3 * math.log(2), rel=1e-14)
    with pytest.raises(NotPositiveDefiniteError):
        matfun.logdet_spd(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_lyap_examples():
    np.testing.assert_allclose(matfun.lyap_solve(-np.eye(3), 2 * np.eye(3)), np.eye(3), atol=1e-14)
    assert matfun.lyap_solve([[-1.0]], [[2.0]])[0, 0] == pytest.approx(1.0)


def test_lyap_singular():
    with pytest.raises(SolverError):
        matfun.lyap_solve(np.array([[0.0, 1.0], [-1.0, 0.0]]), np.eye(2))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_lyap_matches_quadrature(rng, n):
    model = random_model(rng, n)
    A, D = model.A, model.D
    horizon = 100 / model.decay_rate
    P = matfun.lyap_solve(A, D)
    # each entry separately; the integrand decays like exp(-2 |Re lambda| t)
    Q = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            f = lambda t: (matfun.expm(A, t) @ D @ matfun.expm(A.T, t))[i, j]
            Q[i, j] = scipy.integrate.quad(f, 0, horizon, limit=400, epsabs=1e-13, epsrel=1e-12)[0]
    np.testing.assert_allclose(P, Q, atol=1e-6 * np.linalg.norm(Q))
    assert np.array_equal(P, P.T)


def test_chi_examples():
    assert matfun.chi(2.0) == pytest.approx(-3 - math.log(2), abs=1e-15)
    assert matfun.chi(6.0) == pytest.approx(-5 - math.log(4), abs=1e-14)
    assert matfun.chi(4 / 9) == pytest.approx(-5 / 3 - math.log(2 / 3), abs=1e-15)
    assert matfun.chi_prime(2.0) == pytest.approx(-1.0, abs=1e-15)
    assert matfun.chi_prime(6.0) == pytest.approx(-0.5, abs=1e-15)


@pytest.mark.parametrize("bad", [0.0, -1.0, [1.0, -0.5]])
def test_chi_domain(bad):
    with pytest.raises(DomainError):
        matfun.chi(bad)
    with pytest.raises(DomainError):
        matfun.chi_prime(bad)


def test_chi_prime_matches_difference_quotient():
    h = 1e-6
    for w in (0.01, 0.3, 2.0, 50.0):
        fd = (matfun.chi(w + h) - matfun.chi(w - h)) / (2 * h)
        assert matfun.chi_prime(w) == pytest.approx(fd, rel=1e-6)


def test_chi_prime_solves_riccati_ode(rng):
    w = np.exp(rng.uniform(-6, 6, size=100))
    c = matfun.chi_prime(w)
    # lambda = 0, tau = -1 branch: chi'(1 + w chi') + tau = 0
    res = c * (1 + w * c) - 1
    assert np.max(np.abs(res)) <= 1e-10


def test_chi_vectorized():
    w = np.array([[0.5, 2.0], [6.0, 1.0]])
    out = matfun.chi(w)
    assert out.shape == w.shape
    assert out[0, 1] == pytest.approx(-3 - math.log(2))


def test_trace_chi_product_examples():
    assert matfun.trace_chi_product([[1.0]], [[1.0]]) == pytest.approx(-math.sqrt(5) - math.log(math.sqrt(5) - 1), abs=1e-14)
    assert matfun.trace_chi_product([[1 / 3]], [[4 / 3]]) == pytest.approx(-5 / 3 - math.log(2 / 3), abs=1e-14)


def test_trace_chi_product_matches_nonsymmetric_eigenvalues(rng):
    for n in (2, 3, 5):
        U, V = random_spd(rng, n), random_spd(rng, n)
        lam = np.linalg.eigvals(U @ V).real
        assert matfun.trace_chi_product(U, V) == pytest.approx(float(np.sum(matfun.chi(lam))), rel=1e-11)


def test_trace_chi_product_errors():
    with pytest.raises(ShapeError):
        matfun.trace_chi_product(np.eye(2), np.eye(3))
    with pytest.raises(PositivityViolation):
        matfun.sym_product_eigvals(np.diag([1.0, 1e-17]), np.eye(2))


def test_v_chiprime_v_examples():
    np.testing.assert_allclose(matfun.v_chiprime_v([[2.0]], [[1.0]]), [[-1.0]], atol=1e-15)
    np.testing.assert_allclose(matfun.v_chiprime_v([[1.0]], [[6.0]]), [[-3.0]], atol=1e-14)


def test_v_chiprime_v_directional_derivative(rng):
    U, V = random_spd(rng, 2), random_spd(rng, 2)
    dU = random_spd(rng, 2) - np.eye(2)
    G = matfun.v_chiprime_v(U, V)
    assert np.array_equal(G, G.T)
    h = 1e-6
    fd = (matfun.trace_chi_product(U + h * dU, V) - matfun.trace_chi_product(U - h * dU, V)) / (2 * h)
    assert float(np.trace(G @ dU)) == pytest.approx(fd, rel=1e-7)


def test_frechet_derivative_of_trace_chi(rng):
    # d/dSigma Tr chi(Sigma) = chi'(Sigma), checked entrywise
    S = random_spd(rng, 3)
    I = np.eye(3)
    G = matfun.v_chiprime_v(S, I)
    lam, Q = np.linalg.eigh(S)
    np.testing.assert_allclose(G, (Q * matfun.chi_prime(lam)) @ Q.T, atol=1e-12)
    h = 1e-6
    for i in range(3):
        for j in range(i, 3):
            E = np.zeros((3, 3))
            E[i, j] = E[j, i] = 1.0
            fd = (matfun.trace_chi_product(S + h * E, I) - matfun.trace_chi_product(S - h * E, I)) / (2 * h)
            expected = fd if i == j else fd / 2
            assert G[i, j] == pytest.approx(expected, rel=1e-6, abs=1e-9)


def test_symmetrize_exact():
    X = np.array([[1.0, 2.0], [3.0, 4.0]])
    S = matfun.symmetrize(X)
    assert np.array_equal(S, S.T)
