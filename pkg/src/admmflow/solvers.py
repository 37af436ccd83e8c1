"""Relaxed ADMM with optional Nesterov or heavy-ball momentum.

All three methods share one iteration for ``min_x f(x) + g(Ax)``::

    x+ = argmin_x f(x) + rho/2 ||Ax - zh + uh||^2
    w  = alpha A x+ + (1 - alpha) zh
    z+ = prox_{g/rho}(w + uh)
    u+ = uh + w - z+
    zh+ = z+ + gamma (z+ - z),   uh+ = u+ + gamma (u+ - u)

and differ only in the extrapolation weight ``gamma``: zero (R-ADMM),
``k / (k + r)`` (R-A-ADMM) or the constant ``1 - r / sqrt(rho)``
(R-HB-ADMM).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .numerics import spectral_bounds
from .prox import ProxOperator

SCHEDULES = ("none", "nesterov", "heavyball")


class ConfigError(ValueError):
    pass


class DivergenceError(RuntimeError):
    def __init__(self, k: int, what: str = "iterate"):
        super().__init__(f"non-finite {what} at iteration {k}")
        self.k = k


@dataclass(frozen=True)
class LinearMap:
    """A linear map given by its action and the action of its transpose."""

    apply: Callable[[np.ndarray], np.ndarray]
    adjoint: Callable[[np.ndarray], np.ndarray]
    matrix: np.ndarray | None = None

    @classmethod
    def from_matrix(cls, A) -> "LinearMap":
        A = np.asarray(A, dtype=float)
        return cls(apply=lambda x: A @ x, adjoint=lambda y: A.T @ y, matrix=A)

    @classmethod
    def identity(cls) -> "LinearMap":
        return cls(apply=lambda x: x, adjoint=lambda y: y)


@dataclass(frozen=True)
class ProblemSpec:
    """``min_x f(x) + g(Ax)`` described by the oracles ADMM needs.

    Parameters
    ----------
    x_update : callable
        ``(z_hat, u_hat, rho) -> argmin_x f(x) + rho/2 ||Ax - z_hat + u_hat||^2``.
    g_prox : callable
        ``(v, kappa) -> prox_{kappa g}(v)``.
    A : LinearMap
    objective : callable
        ``x -> f(x) + g(Ax)``.
    x_star, phi_star : optional
        Known minimizer and optimal value, for diagnostics.
    error_metric : callable, optional
        ``(x, z) -> float`` recorded as ``rel_err``; defaults to
        ``||x - x_star|| / ||x_star||`` when ``x_star`` is known.
    """

    x_update: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    g_prox: ProxOperator
    A: LinearMap
    objective: Callable[[np.ndarray], float]
    x_star: np.ndarray | None = None
    phi_star: float | None = None
    error_metric: Callable[[np.ndarray, np.ndarray], float] | None = None

    def __post_init__(self):
        if self.A.matrix is not None:
            _, smin = spectral_bounds(self.A.matrix)
            if smin <= 1e-10:
                raise ValueError("A must have full column rank (sigma_min <= 1e-10)")

    def rel_err(self, x, z) -> float | None:
        if self.error_metric is not None:
            return float(self.error_metric(x, z))
        if self.x_star is not None:
            ref = np.linalg.norm(self.x_star)
            return float(np.linalg.norm(x - self.x_star) / (ref if ref > 0 else 1.0))
        return None


@dataclass(frozen=True)
class SolverConfig:
    rho: float
    alpha: float = 1.0
    schedule: str = "none"
    r: float = 3.0
    max_iters: int = 200
    primal_tol: float = 0.0
    dual_tol: float = 0.0

    def __post_init__(self):
        if not self.rho > 0:
            raise ConfigError(f"rho must be > 0, got {self.rho}")
        if not 0 < self.alpha < 2:
            raise ConfigError(f"alpha must lie in the open interval (0, 2), got {self.alpha}")
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"schedule must be one of {SCHEDULES}, got {self.schedule!r}")
        if self.schedule == "nesterov" and not self.r >= 3:
            raise ConfigError(f"nesterov schedule needs r >= 3, got {self.r}")
        if self.schedule == "heavyball":
            if not self.r > 0:
                raise ConfigError(f"heavyball schedule needs r > 0, got {self.r}")
            if not self.rho > self.r ** 2:
                raise ConfigError(
                    f"heavyball schedule needs rho > r^2 so that gamma is in (0, 1); "
                    f"got rho={self.rho}, r={self.r}")
        if self.max_iters < 0 or self.primal_tol < 0 or self.dual_tol < 0:
            raise ConfigError("max_iters and tolerances must be nonnegative")

    def gamma(self, k: int) -> float:
        """Extrapolation weight produced by the step that leaves iteration ``k``.

        The step out of iteration ``k`` yields ``gamma_{k+1} = k / (k + r)``
        for Nesterov momentum; the initialization step (``k = -1``) gets 0.
        """
        if self.schedule == "none":
            return 0.0
        if self.schedule == "nesterov":
            return max(k, 0) / (max(k, 0) + self.r)
        return 1.0 - self.r / math.sqrt(self.rho)


@dataclass
class IterateState:
    k: int
    x: np.ndarray | None
    z: np.ndarray
    u: np.ndarray
    z_hat: np.ndarray
    u_hat: np.ndarray
    z_prev: np.ndarray
    u_prev: np.ndarray

    @classmethod
    def initial(cls, z_init) -> "IterateState":
        """State before the first x-update: ``u_hat = 0``, ``z_hat = z_init``."""
        z = np.array(z_init, dtype=float, copy=True)
        u = np.zeros_like(z)
        return cls(k=-1, x=None, z=z, u=u, z_hat=z, u_hat=u, z_prev=z, u_prev=u)


def step(state: IterateState, problem: ProblemSpec, config: SolverConfig) -> IterateState:
    """One pass of x-, z-, u-updates followed by extrapolation."""
    rho, alpha = config.rho, config.alpha
    x = problem.x_update(state.z_hat, state.u_hat, rho)
    w = alpha * problem.A.apply(x) + (1.0 - alpha) * state.z_hat
    z = problem.g_prox(w + state.u_hat, 1.0 / rho)
    u = state.u_hat + w - z
    gamma = config.gamma(state.k)
    if gamma == 0.0:
        z_hat, u_hat = z, u
    else:
        z_hat = z + gamma * (z - state.z)
        u_hat = u + gamma * (u - state.u)
    k = state.k + 1
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z_hat)) and np.all(np.isfinite(u_hat))):
        raise DivergenceError(k)
    return IterateState(k=k, x=x, z=z, u=u, z_hat=z_hat, u_hat=u_hat,
                        z_prev=state.z, u_prev=state.u)


def residuals(state_prev: IterateState, state: IterateState, problem: ProblemSpec,
              config: SolverConfig) -> tuple[float, float]:
    """Primal ``||A x - z||`` and dual ``rho ||A^T (z - z_prev)||`` residuals."""
    primal = float(np.linalg.norm(problem.A.apply(state.x) - state.z))
    dual = config.rho * float(np.linalg.norm(problem.A.adjoint(state.z - state_prev.z)))
    return primal, dual


@dataclass(frozen=True)
class TraceRecord:
    k: int
    objective: float
    primal_res: float
    dual_res: float
    rel_err: float | None = None


@dataclass
class SolverTrace:
    records: list[TraceRecord] = field(default_factory=list)
    status: str = "running"
    final: IterateState | None = None
    iterates: list[np.ndarray] | None = None

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def to_csv(self, path: str | Path | None = None, comment: str | None = None) -> str:
        """Serialize as CSV (``iter,objective,primal_res,dual_res,rel_err``)."""
        buf = io.StringIO()
        if comment is not None:
            buf.write(f"# {comment}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iter", "objective", "primal_res", "dual_res", "rel_err"])
        for rec in self.records:
            writer.writerow([rec.k, repr(rec.objective), repr(rec.primal_res),
                             repr(rec.dual_res), "" if rec.rel_err is None else repr(rec.rel_err)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def read_trace_csv(path: str | Path) -> SolverTrace:
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    records = [TraceRecord(int(row["iter"]), float(row["objective"]), float(row["primal_res"]),
                           float(row["dual_res"]), float(row["rel_err"]) if row["rel_err"] else None)
               for row in reader]
    return SolverTrace(records=records, status="loaded")


def run(problem: ProblemSpec, config: SolverConfig, z_init,
        keep_iterates: bool = False, callback: Callable[[IterateState], None] | None = None
        ) -> SolverTrace:
    """Run the iteration from ``u_hat = 0``, ``z_hat = z_init``.

    The first x-update produces ``x_0``; ``max_iters`` further steps follow
    unless both residuals drop below their (positive) tolerances. The trace
    holds one record per iterate, ``x_0`` included.
    """
    state = IterateState.initial(z_init)
    trace = SolverTrace(iterates=[] if keep_iterates else None)
    use_tol = config.primal_tol > 0 or config.dual_tol > 0
    while True:
        new = step(state, problem, config)
        primal, dual = residuals(state, new, problem, config)
        obj = float(problem.objective(new.x))
        if not math.isfinite(obj):
            raise DivergenceError(new.k, "objective")
        trace.records.append(TraceRecord(new.k, obj, primal, dual, problem.rel_err(new.x, new.z)))
        if keep_iterates:
            trace.iterates.append(new.x.copy())
        if callback is not None:
            callback(new)
        state = new
        if use_tol and new.k > 0 and primal <= config.primal_tol and dual <= config.dual_tol:
            trace.status = "converged"
            break
        if new.k >= config.max_iters:
            trace.status = "max_iters"
            break
    trace.final = state
    return trace


def with_schedule(config: SolverConfig, schedule: str, r: float | None = None) -> SolverConfig:
    return replace(config, schedule=schedule, r=config.r if r is None else r)


def replace_iters(config: SolverConfig, max_iters: int) -> SolverConfig:
    return replace(config, max_iters=max_iters)
