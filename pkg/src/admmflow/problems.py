"""Experiment instances: l1 trend filtering, robust PCA, and quadratics.

Random data come from :class:`CounterRNG`, a SplitMix64 counter-based
generator: draw ``i`` of stream ``s`` under seed ``k`` is
``mix64(k * PHI + s * PHI_2 + (i + 1) * PHI)`` with the SplitMix64
finalizer, so any implementation with 64-bit wrapping arithmetic
reproduces the same bits. Uniform doubles use the top 53 bits; normals use
Box-Muller (cosine branch first, then sine); sampling without replacement
is a Fisher-Yates prefix shuffle.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .numerics import (GramSolveCache, second_difference_matrix, spectral_bounds,
                       write_matrix)
from .prox import (NonsmoothTerm, composite_oracle, nuclear_norm, prox_l1, prox_zero,
                   singular_value_threshold, soft_threshold)
from .solvers import LinearMap, ProblemSpec, SolverConfig, run

_PHI = np.uint64(0x9E3779B97F4A7C15)
_STREAM = np.uint64(0xD1B54A32D192ED03)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix64(x: np.ndarray) -> np.ndarray:
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


class CounterRNG:
    """Seedable SplitMix64 counter generator with independent streams."""

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        self.counter = 0
        # hashing the (seed, stream) pair keeps neighbouring seeds from sharing
        # shifted copies of one counter sequence
        with np.errstate(over="ignore"):
            key = _mix64(np.uint64(self.stream % 2**64) * _STREAM + _PHI)
            self._base = _mix64(np.uint64(self.seed % 2**64) * _PHI + key)

    def bits(self, size: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + size + 1, dtype=np.uint64)
        self.counter += size
        with np.errstate(over="ignore"):
            return _mix64(self._base + idx * _PHI)

    def uniform(self, size: int) -> np.ndarray:
        """Doubles in ``[0, 1)``."""
        return (self.bits(size) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53

    def normal(self, size: int) -> np.ndarray:
        m = (size + 1) // 2
        u1 = 1.0 - self.uniform(m)  # (0, 1]
        u2 = self.uniform(m)
        rad = np.sqrt(-2.0 * np.log(u1))
        return np.concatenate([rad * np.cos(2 * np.pi * u2), rad * np.sin(2 * np.pi * u2)])[:size]

    def sample_without_replacement(self, population: int, k: int) -> np.ndarray:
        if not 0 <= k <= population:
            raise ValueError(f"cannot draw {k} items from {population}")
        perm = np.arange(population)
        u = self.uniform(k)
        for i in range(k):
            j = i + int(u[i] * (population - i))
            perm[i], perm[j] = perm[j], perm[i]
        return perm[:k].copy()


# ---------------------------------------------------------------- trend filtering

@dataclass(frozen=True)
class TrendInstance:
    y: np.ndarray
    x_true: np.ndarray
    lam: float
    n: int
    p: float
    sigma: float
    b: float
    seed: int
    slope_changes: int = 0

    def params(self) -> dict:
        return {"kind": "trend", "n": self.n, "p": self.p, "sigma": self.sigma, "b": self.b,
                "lambda": self.lam, "seed": self.seed}


def gen_trend_series(n: int, p: float, sigma: float, b: float, seed: int
                     ) -> tuple[np.ndarray, np.ndarray, int]:
    """Piecewise-linear trend with Markov slopes plus Gaussian noise.

    Returns ``(x_true, y, slope_changes)``. ``x_0 = 0`` and
    ``x_{i+1} = x_i + v_i``; each later slope keeps its predecessor with
    probability ``p`` and is otherwise redrawn from ``U(-b, b)``. Only the
    ``n - 2`` slope transitions that affect ``x`` are drawn.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be a probability, got {p}")
    if sigma < 0 or not b > 0 or n < 2:
        raise ValueError("need sigma >= 0, b > 0, n >= 2")
    rng = CounterRNG(seed, stream=1)
    fresh = rng.uniform(n - 1) * 2 * b - b
    keep = rng.uniform(n - 1) < p
    keep[0] = False
    v = np.empty(n - 1)
    v[0] = fresh[0]
    for i in range(1, n - 1):
        v[i] = v[i - 1] if keep[i] else fresh[i]
    x = np.concatenate([[0.0], np.cumsum(v)])
    noise = CounterRNG(seed, stream=2).normal(n)
    y = x + sigma * noise
    return x, y, int(np.count_nonzero(~keep[1:]))


def make_trend_instance(n: int = 1000, p: float = 0.99, sigma: float = 20.0, b: float = 0.5,
                        lam: float = 2500.0, seed: int = 42) -> TrendInstance:
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    x, y, changes = gen_trend_series(n, p, sigma, b, seed)
    return TrendInstance(y=y, x_true=x, lam=float(lam), n=n, p=p, sigma=sigma, b=b, seed=seed,
                         slope_changes=changes)


def trend_filter_problem(inst: TrendInstance) -> ProblemSpec:
    """``1/2 ||y - x||^2 + lam ||D x||_1`` in the ``f(x) + g(Ax)`` template."""
    D = second_difference_matrix(inst.n)
    y, lam = inst.y, inst.lam
    caches: dict[float, GramSolveCache] = {}

    def x_update(z_hat, u_hat, rho):
        cache = caches.get(rho)
        if cache is None:
            cache = caches[rho] = GramSolveCache.build(D, rho)
        return cache.solve(y + rho * (D.T @ (z_hat - u_hat)))

    def objective(x):
        return 0.5 * float(np.sum((y - x) ** 2)) + lam * float(np.sum(np.abs(D @ x)))

    x_true = inst.x_true
    xt_norm = np.linalg.norm(x_true)
    return ProblemSpec(
        x_update=x_update,
        g_prox=lambda v, kappa: soft_threshold(v, lam * kappa),
        A=LinearMap.from_matrix(D),
        objective=objective,
        error_metric=lambda x, z: float(np.linalg.norm(x - x_true) / xt_norm),
    )


# ---------------------------------------------------------------- robust PCA

@dataclass(frozen=True)
class RpcaInstance:
    M: np.ndarray
    X_star: np.ndarray
    Z_star: np.ndarray
    lam: float
    n: int
    q: int
    s: int
    seed: int

    def params(self) -> dict:
        return {"kind": "rpca", "n": self.n, "q": self.q, "s": self.s, "lambda": self.lam,
                "seed": self.seed}


def gen_rpca_instance(n: int, q: int, s: int, seed: int, lam: float | None = None
                      ) -> RpcaInstance:
    """``M = M1 M2^T + Z`` with Gaussian ``N(0, 1/n)`` factors and ``s`` random +-1 spikes."""
    if not 0 <= q <= n:
        raise ValueError(f"need 0 <= q <= n, got q={q}, n={n}")
    if not 0 <= s <= n * n:
        raise ValueError(f"need 0 <= s <= n^2, got s={s}")
    scale = 1.0 / math.sqrt(n)
    M1 = CounterRNG(seed, stream=3).normal(n * q).reshape(n, q) * scale
    M2 = CounterRNG(seed, stream=4).normal(n * q).reshape(n, q) * scale
    X = M1 @ M2.T
    rng = CounterRNG(seed, stream=5)
    support = rng.sample_without_replacement(n * n, s)
    signs = np.where(rng.uniform(s) < 0.5, -1.0, 1.0)
    Z = np.zeros(n * n)
    Z[support] = signs
    Z = Z.reshape(n, n)
    lam = 1.0 / n if lam is None else float(lam)
    if not lam > 0:
        raise ValueError("lambda must be > 0")
    return RpcaInstance(M=X + Z, X_star=X, Z_star=Z, lam=lam, n=n, q=q, s=s, seed=seed)


def rpca_problem(inst: RpcaInstance) -> ProblemSpec:
    """``||X||_* + lam ||M - X||_1`` via the substitution ``Z = M - X``.

    With ``A`` the identity, the x-update is singular value thresholding
    and the z-variable estimates ``M - Z``; the sparse component at any
    iterate is ``M - z``. ``rel_err`` records ``||X + Z - M|| / ||M||``.
    """
    M, lam = inst.M, inst.lam
    m_norm = np.linalg.norm(M)

    def g_prox(v, kappa):
        return M - soft_threshold(M - v, lam * kappa)

    return ProblemSpec(
        x_update=lambda z_hat, u_hat, rho: singular_value_threshold(z_hat - u_hat, 1.0 / rho),
        g_prox=g_prox,
        A=LinearMap.identity(),
        objective=lambda X: nuclear_norm(X) + lam * float(np.sum(np.abs(M - X))),
        error_metric=lambda X, z: float(np.linalg.norm(X - z) / m_norm),
    )


# ---------------------------------------------------------------- quadratics

@dataclass(frozen=True)
class QuadInstance:
    """``Phi(x) = 1/2 x^T Q x - b^T x + lam ||A x||_1``."""

    Q: np.ndarray
    b: np.ndarray
    lambda_l1: float
    A: np.ndarray
    mu: float
    x_star: np.ndarray
    phi_star: float

    def phi(self, x) -> float:
        x = np.asarray(x, dtype=float)
        val = 0.5 * x @ self.Q @ x - self.b @ x
        if self.lambda_l1:
            val += self.lambda_l1 * np.sum(np.abs(self.A @ x))
        return float(val)

    def oracle(self, epsilon: float = 1e-4):
        Q, b = self.Q, self.b
        terms = []
        if self.lambda_l1:
            lam = self.lambda_l1
            terms.append(NonsmoothTerm(value=lambda v: lam * float(np.sum(np.abs(v))),
                                       prox=prox_l1(lam), B=self.A, separable=True))
        return composite_oracle(smooth_value=lambda x: 0.5 * x @ Q @ x - b @ x,
                                smooth_grad=lambda x: Q @ x - b,
                                smooth_hess=lambda x: Q,
                                terms=terms, epsilon=epsilon)


def quad_l1_problem(Q, b, lambda_l1: float = 0.0, A=None, solve_iters: int = 10_000
                    ) -> tuple[QuadInstance, ProblemSpec]:
    """Quadratic-plus-l1 instance and its ADMM problem spec.

    With ``lambda_l1 = 0`` the optimum is the linear solve ``Q x = b``;
    otherwise it comes from a long, tightly converged R-ADMM run.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    b = np.asarray(b, dtype=float)
    n = b.size
    if Q.shape != (n, n):
        raise ValueError(f"Q has shape {Q.shape}, expected {(n, n)}")
    if not np.allclose(Q, Q.T, rtol=0, atol=1e-12):
        raise ValueError("Q must be symmetric")
    if lambda_l1 < 0:
        raise ValueError("lambda_l1 must be >= 0")
    A = np.eye(n) if A is None else np.atleast_2d(np.asarray(A, dtype=float))
    mu = float(np.linalg.eigvalsh(Q)[0])
    if mu < -1e-12:
        raise ValueError("Q must be positive semidefinite")
    caches: dict[float, GramSolveCache] = {}

    def x_update(z_hat, u_hat, rho):
        cache = caches.get(rho)
        if cache is None:
            cache = caches[rho] = GramSolveCache.build(A, rho, Q=Q)
        return cache.solve(b + rho * (A.T @ (z_hat - u_hat)))

    def objective(x):
        val = 0.5 * x @ Q @ x - b @ x
        if lambda_l1:
            val += lambda_l1 * np.sum(np.abs(A @ x))
        return float(val)

    g_prox = prox_zero if lambda_l1 == 0 else prox_l1(lambda_l1)
    spec = ProblemSpec(x_update=x_update, g_prox=g_prox, A=LinearMap.from_matrix(A),
                       objective=objective)
    if lambda_l1 == 0:
        x_star = np.linalg.lstsq(Q, b, rcond=None)[0]
    else:
        sigma_max, _ = spectral_bounds(A)
        trace = run(spec, SolverConfig(rho=max(1.0, float(np.linalg.norm(Q, 2))) / sigma_max ** 2,
                                       alpha=1.0, max_iters=solve_iters,
                                       primal_tol=1e-14, dual_tol=1e-14),
                    np.zeros(A.shape[0]))
        x_star = trace.final.x
    inst = QuadInstance(Q=Q, b=b, lambda_l1=float(lambda_l1), A=A, mu=mu, x_star=x_star,
                        phi_star=objective(x_star))
    spec = ProblemSpec(x_update=x_update, g_prox=g_prox, A=spec.A, objective=objective,
                       x_star=x_star, phi_star=inst.phi_star)
    return inst, spec


STANDARD_Q = ((3.0, 1.0), (1.0, 2.0))
STANDARD_B = (1.0, 1.0)
STANDARD_A = ((2.0, 0.0), (0.0, 1.0))
STANDARD_X0 = (2.0, -1.5)


def standard_quadratic(lambda_l1: float = 0.0) -> tuple[QuadInstance, ProblemSpec]:
    """The 2-d test instance used by the flow diagnostics.

    ``Q = [[3, 1], [1, 2]]``, ``b = (1, 1)``, ``A = diag(2, 1)``; with
    ``lambda_l1 = 0`` the minimizer is ``(0.2, 0.4)`` with value ``-0.3`` and
    ``mu = (5 - sqrt(5)) / 2``. Flows start from :data:`STANDARD_X0`.
    """
    return quad_l1_problem(np.array(STANDARD_Q), np.array(STANDARD_B), lambda_l1,
                           np.array(STANDARD_A))


# ---------------------------------------------------------------- metrics and I/O

def recovery_error(estimate, truth) -> float:
    """``||estimate - truth|| / ||truth||`` (Frobenius norm for matrices)."""
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise ValueError(f"shape mismatch: {estimate.shape} vs {truth.shape}")
    denom = np.linalg.norm(truth)
    if denom == 0:
        raise ValueError("recovery_error: truth is zero")
    return float(np.linalg.norm(estimate - truth) / denom)


def save_instance(inst: TrendInstance | RpcaInstance, directory: str | Path) -> list[Path]:
    """Write the instance matrices as text plus a ``params.json`` sidecar."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    if isinstance(inst, TrendInstance):
        arrays = {"y": inst.y[None, :], "x_true": inst.x_true[None, :]}
    else:
        arrays = {"M": inst.M, "X_star": inst.X_star, "Z_star": inst.Z_star}
    written = []
    for name, arr in arrays.items():
        path = out / f"{name}.txt"
        write_matrix(path, arr)
        written.append(path)
    sidecar = out / "params.json"
    sidecar.write_text(json.dumps(inst.params(), sort_keys=True) + "\n")
    written.append(sidecar)
    return written
