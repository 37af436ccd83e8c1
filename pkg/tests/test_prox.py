import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import optimize

from admmflow.prox import (NonsmoothTerm, composite_oracle, moreau_envelope, moreau_gradient,
                           nuclear_norm, prox_l1, prox_nuclear, prox_sq_norm,
                           singular_value_threshold, soft_threshold)

vectors = arrays(np.float64, st.integers(1, 6), elements=st.floats(-10, 10))


def l1_optimality_residual(u, v, kappa):
    """Distance of ``v - u`` from ``kappa * d||u||_1``."""
    g = v - u
    on = u != 0
    res_on = np.abs(g[on] - kappa * np.sign(u[on]))
    res_off = np.maximum(np.abs(g[~on]) - kappa, 0.0)
    return float(np.max(np.concatenate([res_on, res_off, [0.0]])))


def test_soft_threshold_example():
    np.testing.assert_array_equal(soft_threshold(np.array([2.0, -0.5, 0.0]), 1.0), [1.0, 0.0, 0.0])


def test_soft_threshold_tie_is_zero():
    assert soft_threshold(np.array([1.0, -1.0]), 1.0).tolist() == [0.0, 0.0]


@given(vectors)
def test_soft_threshold_zero_kappa(v):
    np.testing.assert_array_equal(soft_threshold(v, 0.0), v)


def test_soft_threshold_negative_kappa():
    with pytest.raises(ValueError):
        soft_threshold(np.ones(2), -0.1)


@given(vectors, st.floats(0, 5))
def test_soft_threshold_optimality(v, kappa):
    assert l1_optimality_residual(soft_threshold(v, kappa), v, kappa) <= 1e-12 * (1 + np.abs(v).max())


def test_soft_threshold_random_r3():
    v = np.random.default_rng(0).normal(size=3)
    assert l1_optimality_residual(soft_threshold(v, 0.7), v, 0.7) <= 1e-15


def test_svt_zero_kappa():
    M = np.random.default_rng(1).normal(size=(3, 4))
    np.testing.assert_allclose(singular_value_threshold(M, 0.0), M, atol=1e-10)


def test_svt_diag():
    np.testing.assert_allclose(singular_value_threshold(np.diag([3.0, 1.0]), 2.0),
                               np.diag([1.0, 0.0]), atol=1e-14)


def test_svt_negative_kappa():
    with pytest.raises(ValueError):
        singular_value_threshold(np.eye(2), -1.0)


def brute_force_prox_nuclear(M, kappa):
    """Minimize ``kappa ||U||_* + 1/2 ||U - M||^2`` by grid search plus descent."""
    def obj(u):
        U = u.reshape(2, 2)
        return kappa * nuclear_norm(U) + 0.5 * np.sum((U - M) ** 2)

    grid = np.linspace(-1.0, 1.0, 9)
    best = min((M.ravel() + np.array(d) for d in itertools.product(grid, repeat=4)), key=obj)
    res = optimize.minimize(obj, best, method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 20000})
    for _ in range(3):  # restarts shake Nelder-Mead off the kinks
        res = optimize.minimize(obj, res.x, method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 20000})
    return res.x.reshape(2, 2)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_svt_matches_brute_force(seed):
    M = np.random.default_rng(seed).normal(size=(2, 2))
    np.testing.assert_allclose(singular_value_threshold(M, 0.5), brute_force_prox_nuclear(M, 0.5),
                               atol=1e-4)


def test_moreau_gradient_abs():
    prox = prox_l1(1.0)
    assert moreau_gradient(prox, np.array([2.0]), 1.0)[0] == pytest.approx(1.0)
    assert moreau_gradient(prox, np.array([0.5]), 1.0)[0] == pytest.approx(0.5)


def test_moreau_gradient_rejects_eps():
    with pytest.raises(ValueError):
        moreau_gradient(prox_l1(), np.ones(2), 0.0)


def test_moreau_gradient_smooth_converges():
    v = np.array([1.5, -0.3, 2.0])
    errs = [np.linalg.norm(moreau_gradient(prox_sq_norm(1.0), v, eps) - v)
            for eps in (1e-1, 1e-2, 1e-3)]
    # exact value is v / (1 + eps), so the error is eps |v| / (1 + eps)
    for eps, err in zip((1e-1, 1e-2, 1e-3), errs):
        assert err == pytest.approx(eps * np.linalg.norm(v) / (1 + eps), rel=1e-9)
    assert errs[0] > errs[1] > errs[2]


def test_moreau_envelope_of_abs_is_huber():
    h = lambda u: float(np.sum(np.abs(u)))
    eps = 0.5
    for v, want in ((0.2, 0.2 ** 2 / (2 * eps)), (3.0, 3.0 - eps / 2)):
        assert moreau_envelope(h, prox_l1(), np.array([v]), eps) == pytest.approx(want)


@settings(max_examples=50)
@given(st.integers(0, 2**31), st.floats(0.01, 3))
def test_prox_nonexpansive(seed, kappa):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=5) * 3, rng.normal(size=5) * 3
    for prox in (prox_l1(1.3), prox_sq_norm(2.0, 0.5)):
        assert np.linalg.norm(prox(a, kappa) - prox(b, kappa)) <= np.linalg.norm(a - b) + 1e-12
    A, B = rng.normal(size=(3, 3)), rng.normal(size=(3, 3))
    P = prox_nuclear(1.0)
    assert np.linalg.norm(P(A, kappa) - P(B, kappa)) <= np.linalg.norm(A - B) + 1e-10


@settings(max_examples=50)
@given(st.integers(0, 2**31), st.sampled_from([1e-3, 1e-1, 1.0]))
def test_moreau_gradient_lipschitz(seed, eps):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=4), rng.normal(size=4)
    ga, gb = moreau_gradient(prox_l1(), a, eps), moreau_gradient(prox_l1(), b, eps)
    assert np.linalg.norm(ga - gb) <= np.linalg.norm(a - b) / eps + 1e-9


@pytest.mark.parametrize("eps", [1e-1, 1e-3])
def test_subgradient_inequality_with_slack(eps):
    rng = np.random.default_rng(7)
    l1 = lambda u: float(np.sum(np.abs(u)))
    for _ in range(50):
        x, y = rng.normal(size=4), rng.normal(size=4) * 2
        xi = moreau_gradient(prox_l1(), x, eps)
        assert l1(y) >= l1(x) + xi @ (y - x) - eps * (xi @ xi) / 2 - 1e-12
        X, Y = rng.normal(size=(3, 3)), rng.normal(size=(3, 3))
        Xi = moreau_gradient(prox_nuclear(), X, eps)
        assert nuclear_norm(Y) >= nuclear_norm(X) + np.sum(Xi * (Y - X)) - eps * np.sum(Xi ** 2) / 2 - 1e-10


def test_composite_oracle_smooth_part_only():
    Q = np.array([[2.0, 0.5], [0.5, 1.0]])
    oracle = composite_oracle(lambda x: 0.5 * x @ Q @ x, lambda x: Q @ x, lambda x: Q)
    x = np.array([0.3, -1.0])
    assert oracle.smooth
    assert oracle.value(x) == oracle.smoothed_value(x)
    np.testing.assert_allclose(oracle.element(x), Q @ x)
    np.testing.assert_allclose(oracle.jacobian(x), Q)


def test_composite_oracle_jacobian_matches_fd():
    B = np.array([[2.0, 0.0], [1.0, 1.0]])
    term = NonsmoothTerm(lambda v: 0.3 * float(np.sum(np.abs(v))), prox_l1(0.3), B=B,
                         separable=True)
    oracle = composite_oracle(terms=[term], epsilon=0.1)
    x = np.array([0.001, 0.002])  # inside the smoothing band of both rows
    J = oracle.jacobian(x)
    d = 1e-7
    fd = np.column_stack([(oracle.element(x + d * e) - oracle.element(x - d * e)) / (2 * d)
                          for e in np.eye(2)])
    np.testing.assert_allclose(J, fd, atol=1e-5)
    np.testing.assert_allclose(J, B.T @ B / 0.1, atol=1e-6)


def test_composite_oracle_element_approaches_subgradient():
    term = NonsmoothTerm(lambda v: float(np.sum(np.abs(v))), prox_l1())
    x = np.array([0.5, -2.0])
    for eps in (1e-2, 1e-4):
        np.testing.assert_allclose(composite_oracle(terms=[term], epsilon=eps).element(x),
                                   [1.0, -1.0])
