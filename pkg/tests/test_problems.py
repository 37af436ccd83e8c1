import json
import math

import numpy as np
import pytest

from admmflow.numerics import read_matrix, second_difference_matrix, svd
from admmflow.prox import nuclear_norm, soft_threshold
from admmflow.problems import (CounterRNG, gen_rpca_instance, gen_trend_series,
                               make_trend_instance, quad_l1_problem, recovery_error,
                               rpca_problem, save_instance, standard_quadratic,
                               trend_filter_problem)
from admmflow.solvers import SolverConfig, run


# ---------------------------------------------------------------- trend filtering

def test_trend_noiseless_no_switching_is_a_line():
    x, y, changes = gen_trend_series(50, 1.0, 0.0, 0.5, seed=3)
    c = x[1]
    assert abs(c) < 0.5 and changes == 0
    np.testing.assert_allclose(x, c * np.arange(50), rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(y, x)


def test_trend_rejects_bad_probability():
    for p in (-0.1, 1.5):
        with pytest.raises(ValueError):
            gen_trend_series(10, p, 1.0, 0.5, seed=0)


def test_trend_instance_echoes_parameters():
    inst = make_trend_instance(n=1000, p=0.99, sigma=20.0, b=0.5, seed=7)
    assert inst.y.shape == inst.x_true.shape == (1000,)
    assert inst.x_true[0] == 0.0
    assert (inst.n, inst.p, inst.sigma, inst.b, inst.lam) == (1000, 0.99, 20.0, 0.5, 2500.0)
    with pytest.raises(ValueError):
        make_trend_instance(n=10, lam=-1.0)


def test_slope_change_count_matches_binomial_mean():
    n, p = 1000, 0.99
    counts = np.array([gen_trend_series(n, p, 20.0, 0.5, seed)[2] for seed in range(100)])
    # the first slope is always fresh, leaving n - 2 Bernoulli transitions
    mean = (1 - p) * (n - 2)
    sd_of_mean = math.sqrt((n - 2) * p * (1 - p) / counts.size)
    assert abs(counts.mean() - mean) <= 3 * sd_of_mean


def test_noiseless_trend_second_difference_sparsity():
    x, _, changes = gen_trend_series(400, 0.95, 0.0, 0.5, seed=11)
    Dx = second_difference_matrix(400) @ x
    assert changes > 0
    assert np.count_nonzero(np.abs(Dx) > 1e-9) == changes


def test_trend_generator_is_bit_deterministic():
    a = gen_trend_series(300, 0.9, 2.0, 0.5, seed=5)
    b = gen_trend_series(300, 0.9, 2.0, 0.5, seed=5)
    assert a[0].tobytes() == b[0].tobytes() and a[1].tobytes() == b[1].tobytes()
    c = gen_trend_series(300, 0.9, 2.0, 0.5, seed=6)
    assert not np.array_equal(a[1], c[1])


def test_trend_objective_at_data():
    inst = make_trend_instance(n=200, lam=3.0, seed=2)
    prob = trend_filter_problem(inst)
    D = second_difference_matrix(200)
    assert prob.objective(inst.y) == pytest.approx(3.0 * np.abs(D @ inst.y).sum(), rel=1e-12)


def test_trend_objective_matches_direct_evaluation():
    inst = make_trend_instance(n=120, lam=7.5, seed=4)
    prob = trend_filter_problem(inst)
    D = second_difference_matrix(120)
    x = np.random.default_rng(0).normal(size=120) * 10
    direct = 0.5 * np.sum((inst.y - x) ** 2) + 7.5 * np.abs(D @ x).sum()
    assert abs(prob.objective(x) - direct) <= 1e-12 * abs(direct)


def test_trend_x_update_solves_normal_equations():
    inst = make_trend_instance(n=80, lam=1.0, seed=1)
    prob = trend_filter_problem(inst)
    rng = np.random.default_rng(1)
    zh, uh = rng.normal(size=78), rng.normal(size=78)
    x = prob.x_update(zh, uh, 5.0)
    D = second_difference_matrix(80)
    np.testing.assert_allclose((np.eye(80) + 5.0 * D.T @ D) @ x, inst.y + 5.0 * D.T @ (zh - uh),
                               atol=1e-9)


def test_trend_full_scale_run_completes():
    inst = make_trend_instance()
    trace = run(trend_filter_problem(inst), SolverConfig(rho=500.0, alpha=1.35, max_iters=200),
                np.zeros(998))
    assert len(trace.records) == 201
    assert np.all(np.isfinite(trace.column("objective")))


# ---------------------------------------------------------------- robust PCA

def test_rpca_without_spikes_is_low_rank():
    inst = gen_rpca_instance(40, 3, 0, seed=1)
    np.testing.assert_array_equal(inst.M, inst.X_star)
    assert svd(inst.M).S[3] <= 1e-10


def test_rpca_support_and_signs():
    n = 200
    inst = gen_rpca_instance(n, int(0.05 * n), int(0.1 * n * n), seed=9)
    nz = inst.Z_star[inst.Z_star != 0]
    assert nz.size == 4000
    assert set(np.unique(nz).tolist()) <= {-1.0, 1.0}
    # M is formed as X* + Z* in floating point, so the sum is reproduced bit for bit
    assert np.array_equal(inst.M, inst.X_star + inst.Z_star)
    assert np.max(np.abs(inst.M - inst.X_star - inst.Z_star)) <= 1e-15
    assert np.linalg.matrix_rank(inst.X_star) <= 10


def test_rpca_rejects_oversized_support():
    with pytest.raises(ValueError):
        gen_rpca_instance(5, 1, 26, seed=0)
    with pytest.raises(ValueError):
        gen_rpca_instance(5, 6, 0, seed=0)


def test_rpca_low_rank_energy_concentrates_near_q():
    n, q = 40, 2
    energy = np.array([np.sum(gen_rpca_instance(n, q, 0, seed).X_star ** 2) for seed in range(50)])
    se = energy.std(ddof=1) / math.sqrt(energy.size)
    assert abs(energy.mean() - q) <= 3 * se


def test_rpca_default_lambda_and_objective_at_truth():
    inst = gen_rpca_instance(30, 2, 90, seed=2)
    assert inst.lam == pytest.approx(1 / 30)
    prob = rpca_problem(inst)
    # with X = X*, the implied sparse part is M - X* = Z*
    want = nuclear_norm(inst.X_star) + inst.lam * 90
    assert prob.objective(inst.X_star) == pytest.approx(want, rel=1e-12)


def test_rpca_objective_matches_direct_evaluation():
    inst = gen_rpca_instance(25, 2, 60, seed=3)
    X = np.random.default_rng(4).normal(size=(25, 25))
    direct = np.linalg.svd(X, compute_uv=False).sum() + inst.lam * np.abs(inst.M - X).sum()
    assert abs(rpca_problem(inst).objective(X) - direct) <= 1e-10 * direct


def test_rpca_sqrt_n_weight_recovers_components():
    # the 1/sqrt(n) weight is the one under which exact recovery holds for this sparsity
    n = 60
    inst = gen_rpca_instance(n, 3, int(0.05 * n * n), seed=1, lam=1 / math.sqrt(n))
    trace = run(rpca_problem(inst), SolverConfig(rho=1.0, alpha=1.3, max_iters=400),
                np.zeros((n, n)))
    assert recovery_error(trace.final.x, inst.X_star) < 1e-3


def test_rpca_generator_is_bit_deterministic():
    a, b = gen_rpca_instance(20, 2, 40, seed=8), gen_rpca_instance(20, 2, 40, seed=8)
    assert a.M.tobytes() == b.M.tobytes()


def test_counter_rng_streams_are_independent_and_repeatable():
    a = CounterRNG(1, stream=1).uniform(1000)
    assert np.array_equal(a, CounterRNG(1, stream=1).uniform(1000))
    assert not np.array_equal(a, CounterRNG(1, stream=2).uniform(1000))
    assert 0.0 <= a.min() and a.max() < 1.0
    assert abs(a.mean() - 0.5) < 4 * math.sqrt(1 / 12 / 1000)
    z = CounterRNG(3).normal(20000)
    assert abs(z.mean()) < 0.05 and abs(z.std() - 1) < 0.05
    # neighbouring seeds must not produce shifted copies of one sequence
    a2 = CounterRNG(2, stream=1).uniform(1000)
    assert not np.intersect1d(a, a2).size
    assert abs(np.corrcoef(a[1:], a2[:-1])[0, 1]) < 0.15
    pick = CounterRNG(4).sample_without_replacement(100, 30)
    assert len(set(pick.tolist())) == 30 and pick.min() >= 0 and pick.max() < 100


# ---------------------------------------------------------------- quadratics

def test_quad_identity_zero_rhs():
    inst, _ = quad_l1_problem(np.eye(2), np.zeros(2))
    np.testing.assert_array_equal(inst.x_star, [0.0, 0.0])
    assert inst.phi_star == 0.0 and inst.mu == pytest.approx(1.0)


def test_quad_diagonal_solve():
    inst, prob = quad_l1_problem(np.diag([4.0, 1.0]), np.array([1.0, 1.0]))
    np.testing.assert_allclose(inst.x_star, [0.25, 1.0], atol=1e-15)
    assert prob.objective(inst.x_star) == pytest.approx(inst.phi_star, abs=1e-10)
    assert inst.mu == pytest.approx(1.0)


def test_quad_l1_matches_soft_threshold():
    inst, _ = quad_l1_problem(np.eye(2), np.array([2.0, 0.1]), 0.5, np.eye(2))
    np.testing.assert_allclose(inst.x_star, soft_threshold(np.array([2.0, 0.1]), 0.5), atol=1e-9)
    # componentwise optimality: b - x in 0.5 * d|x|
    g = np.array([2.0, 0.1]) - inst.x_star
    assert abs(g[0] - 0.5) <= 1e-9 and abs(g[1]) <= 0.5


def test_quad_rejects_asymmetric():
    with pytest.raises(ValueError):
        quad_l1_problem(np.array([[1.0, 2.0], [0.0, 1.0]]), np.ones(2))


def test_standard_quadratic_optimum():
    inst, _ = standard_quadratic()
    np.testing.assert_allclose(inst.x_star, [0.2, 0.4], atol=1e-14)
    assert inst.phi_star == pytest.approx(-0.3, abs=1e-14)
    assert inst.mu == pytest.approx((5 - math.sqrt(5)) / 2, rel=1e-12)


# ---------------------------------------------------------------- metrics and I/O

def test_recovery_error_examples():
    t = np.array([3.0, 4.0])
    assert recovery_error(t, t) == 0.0
    assert recovery_error(2 * t, t) == pytest.approx(1.0)
    rng = np.random.default_rng(5)
    a, b = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
    assert recovery_error(a, b) == pytest.approx(math.sqrt(((a - b) ** 2).sum() / (b ** 2).sum()),
                                                 rel=1e-12)
    with pytest.raises(ValueError):
        recovery_error(t, np.zeros(2))
    with pytest.raises(ValueError):
        recovery_error(t, np.ones(3))


def test_save_instance_writes_matrices_and_params(tmp_path):
    inst = gen_rpca_instance(6, 1, 4, seed=0)
    files = save_instance(inst, tmp_path / "rpca")
    assert sorted(p.name for p in files) == ["M.txt", "X_star.txt", "Z_star.txt", "params.json"]
    np.testing.assert_array_equal(read_matrix(tmp_path / "rpca" / "M.txt"), inst.M)
    params = json.loads((tmp_path / "rpca" / "params.json").read_text())
    assert params == {"kind": "rpca", "n": 6, "q": 1, "s": 4, "lambda": 1 / 6, "seed": 0}
    trend = make_trend_instance(n=12, seed=1)
    save_instance(trend, tmp_path / "trend")
    np.testing.assert_array_equal(read_matrix(tmp_path / "trend" / "y.txt")[0], trend.y)
