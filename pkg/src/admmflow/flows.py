"""Continuous-time limits of the ADMM family and their diagnostics.

The three flows are::

    first_order:  (2 - alpha) M X'                  = -xi(X)
    nesterov:     (2 - alpha) M (X'' + (r / t) X')  = -xi(X)
    constant:     (2 - alpha) M (X'' + r X')        = -xi(X)

with mass matrix ``M = A^T A`` and ``xi`` the Moreau-smoothed subgradient
selection of the oracle. Second-order flows start at rest.

First-order flows use the implicit midpoint rule, solved by damped Newton
on a strongly convex step objective; this stays stable when the smoothing
parameter is much smaller than the step. Second-order flows use a
conformal Strang splitting: the damping is integrated exactly for half a
step, then a kick-drift-kick (velocity Verlet) step, then the second
damping half step.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import linalg

from .numerics import spectral_bounds
from .prox import SubgradientOracle

DAMPINGS = ("first_order", "nesterov", "constant")


class IntegrationError(RuntimeError):
    def __init__(self, t: float):
        super().__init__(f"non-finite state at t={t:.6g}")
        self.t = t


@dataclass(frozen=True)
class FlowSpec:
    """Differential inclusion ``(2 - alpha) A^T A (X'' + d(t) X') = -dPhi(X)``.

    ``damping="first_order"`` drops the acceleration term and ``d``.
    ``r`` is the damping coefficient (``d = r/t`` for Nesterov, ``d = r``
    for constant damping).
    """

    A: np.ndarray
    alpha: float
    oracle: SubgradientOracle
    damping: str = "first_order"
    r: float = 0.0
    mu: float | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "A", np.atleast_2d(np.asarray(self.A, dtype=float)))
        if not 0 < self.alpha < 2:
            raise ValueError(f"alpha must lie in (0, 2), got {self.alpha}")
        if self.damping not in DAMPINGS:
            raise ValueError(f"damping must be one of {DAMPINGS}, got {self.damping!r}")
        if self.damping == "nesterov" and not self.r >= 3:
            raise ValueError(f"nesterov damping needs r >= 3, got {self.r}")
        if self.damping == "constant" and self.r < 0:
            raise ValueError(f"constant damping needs r >= 0, got {self.r}")
        if self.mu is not None and not self.mu > 0:
            raise ValueError("mu must be > 0 when given")
        sigma_max, sigma_min = spectral_bounds(self.A)
        if sigma_min <= 1e-10:
            raise ValueError("A must have full column rank")
        self._cache["sigma"] = (sigma_max, sigma_min)
        self._cache["mass"] = self.A.T @ self.A
        factor = linalg.cho_factor((2.0 - self.alpha) * self._cache["mass"])
        # the flows here are low-dimensional; an explicit inverse turns every
        # force evaluation into one matrix-vector product
        self._cache["mass_inv"] = linalg.cho_solve(factor, np.eye(self.A.shape[1]))

    @property
    def epsilon(self) -> float:
        return self.oracle.epsilon

    @property
    def mass(self) -> np.ndarray:
        return self._cache["mass"]

    @property
    def sigma(self) -> tuple[float, float]:
        return self._cache["sigma"]

    def velocity_field(self, x) -> np.ndarray:
        """``-((2 - alpha) M)^{-1} xi(x)``: first-order velocity, second-order force."""
        return -(self._cache["mass_inv"] @ self.oracle.element(x))

    def damping_coefficient(self, t):
        if self.damping == "nesterov":
            return self.r / np.asarray(t, dtype=float)
        if self.damping == "constant":
            return self.r + 0.0 * np.asarray(t, dtype=float)
        return 0.0 * np.asarray(t, dtype=float)

    def r_bar(self) -> float:
        """Largest heavy-ball damping with the exponential certificate."""
        if self.mu is None:
            raise ValueError("r_bar needs the strong convexity modulus mu")
        return 1.5 / self.sigma[0] * math.sqrt(self.mu / (2.0 - self.alpha))


@dataclass
class Trajectory:
    t: np.ndarray
    X: np.ndarray
    V: np.ndarray | None
    phi: np.ndarray
    phi_eps: np.ndarray
    h: float
    epsilon: float
    damping: str

    def __len__(self):
        return self.t.size

    def to_csv(self, path: str | Path | None = None, extra: dict[str, np.ndarray] | None = None,
               comment: str | None = None) -> str:
        """``t, x_i..., v_i..., phi`` then one column per ``extra`` series."""
        n = self.X.shape[1]
        extra = extra or {}
        buf = io.StringIO()
        if comment is not None:
            buf.write(f"# {comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"x{i}" for i in range(n)] + [f"v{i}" for i in range(n)] + ["phi"]
                   + list(extra))
        for i in range(self.t.size):
            v = ([repr(float(c)) for c in self.V[i]] if self.V is not None else [""] * n)
            w.writerow([repr(float(self.t[i]))] + [repr(float(c)) for c in self.X[i]] + v
                       + [repr(float(self.phi[i]))] + [repr(float(s[i])) for s in extra.values()])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _finish(spec: FlowSpec, ts, xs, vs, h) -> Trajectory:
    X = np.array(xs)
    phi = np.array([spec.oracle.value(x) for x in X])
    phi_eps = phi.copy() if spec.oracle.smooth else np.array(
        [spec.oracle.smoothed_value(x) for x in X])
    if not np.all(np.isfinite(phi)):
        raise IntegrationError(float(np.asarray(ts)[~np.isfinite(phi)][0]))
    return Trajectory(t=np.array(ts), X=X, V=None if vs is None else np.array(vs), phi=phi,
                      phi_eps=phi_eps, h=h, epsilon=spec.epsilon, damping=spec.damping)


def _norm(u: np.ndarray) -> float:
    return math.sqrt(float(u @ u))


def _midpoint_step(spec: FlowSpec, x: np.ndarray, h: float, tol: float = 1e-13,
                   max_newton: int = 50) -> np.ndarray:
    """Solve ``(2 - alpha) M (y - x) + h xi((x + y) / 2) = 0`` for ``y``.

    The left side is the gradient of the strongly convex
    ``psi(y) = (2 - alpha)/2 ||A (y - x)||^2 + 2 h Phi_eps((x + y) / 2)``,
    so damped Newton with an Armijo test on ``psi`` converges.
    """
    oracle = spec.oracle
    W = (2.0 - spec.alpha) * spec.mass

    def psi(y):
        d = y - x
        return 0.5 * d @ W @ d + 2.0 * h * oracle.smoothed_value(0.5 * (x + y))

    y = x + h * spec.velocity_field(x)
    scale = 1.0 + _norm(W @ x) + h * _norm(oracle.element(x))
    for _ in range(max_newton):
        mid = 0.5 * (x + y)
        grad = W @ (y - x) + h * oracle.element(mid)
        if _norm(grad) <= tol * scale:
            return y
        H = W + 0.5 * h * oracle.jacobian(mid)
        delta = -np.linalg.solve(H, grad)
        if oracle.smooth:
            y = y + delta
            continue
        f0, slope, step = psi(y), grad @ delta, 1.0
        # near convergence the decrease drops below rounding in psi
        noise = 1e-14 * (1.0 + abs(f0))
        while step > 1e-12 and psi(y + step * delta) > f0 + 1e-4 * step * slope + noise:
            step *= 0.5
        y = y + step * delta
    return y


def integrate_first_order(spec: FlowSpec, x0, t_end: float, h: float = 1e-3) -> Trajectory:
    """Integrate the first-order inclusion from ``X(0) = x0`` on ``[0, t_end]``."""
    if spec.damping != "first_order":
        raise ValueError("integrate_first_order needs damping='first_order'")
    if not h > 0:
        raise ValueError("step h must be > 0")
    steps = int(round(t_end / h))
    x = np.array(x0, dtype=float)
    ts, xs = [0.0], [x.copy()]
    for i in range(1, steps + 1):
        x = _midpoint_step(spec, x, h)
        if not np.all(np.isfinite(x)):
            raise IntegrationError(i * h)
        ts.append(i * h)
        xs.append(x)
    return _finish(spec, ts, xs, None, h)


def _strang(spec: FlowSpec, x, v, acc, t_start: float, h: float, m: int):
    """``m`` conformal Strang substeps covering ``[t_start, t_start + h]``."""
    tau = h / m
    half = 0.5 * tau
    force = spec.velocity_field
    if spec.damping == "constant":
        damp = math.exp(-spec.r * half)
        for _ in range(m):
            v = (v * damp + half * acc)
            x = x + tau * v
            acc = force(x)
            v = (v + half * acc) * damp
        return x, v, acc
    r = spec.r
    for j in range(m):
        t = t_start + j * tau
        t_half, t_next = t + half, t_start + (j + 1) * tau
        v = v * (t / t_half) ** r + half * acc
        x = x + tau * v
        acc = force(x)
        v = (v + half * acc) * (t_half / t_next) ** r
    return x, v, acc


def integrate_second_order(spec: FlowSpec, x0, t_end: float, h: float = 1e-3,
                           substep_factor: float = 200.0, local_tol: float = 1e-10,
                           max_substeps: int = 1 << 14) -> Trajectory:
    """Integrate a damped second-order inclusion from rest at ``x0``.

    Nesterov damping starts at ``t = h`` (the ``r/t`` coefficient is
    singular at zero) and constant damping at ``t = 0``. Samples are
    stored every ``h``, each with its velocity.

    Each step of length ``h`` starts with ``ceil(substep_factor * r * h / t)``
    substeps for Nesterov damping (one otherwise) and is compared against a
    run with twice as many. When the two disagree by more than
    ``local_tol * (1 + |x| + |v|)`` the interval is bisected and each half
    is treated the same way, down to ``h / max_substeps``. The smoothing
    band around a kink is much narrower than ``h`` when ``epsilon`` is
    small, and crossing it in a single step would break the dissipation of
    the energy. Bisection confines the refinement to the piece that
    actually contains the crossing.
    """
    if spec.damping not in ("nesterov", "constant"):
        raise ValueError("integrate_second_order needs nesterov or constant damping")
    if not h > 0:
        raise ValueError("step h must be > 0")
    t0 = h if spec.damping == "nesterov" else 0.0
    steps = int(round((t_end - t0) / h))
    min_span = h / max_substeps

    def advance(state, t_start, span, m):
        coarse = _strang(spec, *state, t_start, span, m)
        fine = _strang(spec, *state, t_start, span, 2 * m)
        with np.errstate(invalid="ignore", over="ignore"):
            err = _norm(fine[0] - coarse[0]) + _norm(fine[1] - coarse[1])
            scale = 1.0 + _norm(fine[0]) + _norm(fine[1])
        if err <= local_tol * scale or span <= 2 * min_span or not np.isfinite(err):
            return fine
        half, m = 0.5 * span, max(1, m // 2)
        return advance(advance(state, t_start, half, m), t_start + half, half, m)

    x = np.array(x0, dtype=float)
    v = np.zeros_like(x)
    state = (x, v, spec.velocity_field(x))
    ts, xs, vs = [t0], [x.copy()], [v.copy()]
    for i in range(1, steps + 1):
        t_start = t0 + (i - 1) * h
        m = 1
        if spec.damping == "nesterov":
            m = max(1, math.ceil(substep_factor * spec.r * h / t_start))
        state = advance(state, t_start, h, m)
        x, v = state[0], state[1]
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise IntegrationError(t0 + i * h)
        ts.append(t0 + i * h)
        xs.append(x)
        vs.append(v)
    return _finish(spec, ts, xs, vs, h)


def integrate(spec: FlowSpec, x0, t_end: float, h: float = 1e-3) -> Trajectory:
    if spec.damping == "first_order":
        return integrate_first_order(spec, x0, t_end, h)
    return integrate_second_order(spec, x0, t_end, h)


def limit_alpha(alpha: float) -> float:
    """Flow relaxation whose coefficient ``2 - a`` equals ``1 / alpha``.

    Expanding the relaxed iteration to first order in ``1/rho`` gives the
    mass coefficient ``1/alpha`` rather than ``2 - alpha`` (the dual update
    ties ``A x - z`` to ``z_{k+1} - z_k`` through a factor ``alpha``). The two
    agree at ``alpha = 1``. Passing ``limit_alpha(alpha)`` to
    :class:`FlowSpec` gives the flow the iterates actually track.
    """
    if not 0.5 < alpha < 2:
        raise ValueError(f"limit_alpha needs alpha in (1/2, 2), got {alpha}")
    return 2.0 - 1.0 / alpha


_SCHEDULE_DAMPING = {"none": "first_order", "nesterov": "nesterov", "heavyball": "constant"}


def discrete_flow_gap(problem, config, oracle: SubgradientOracle, A, z_init, t_end: float,
                      h_max: float = 1e-3, flow_alpha: float | None = None) -> float:
    """Sup-norm distance between ADMM iterates and flow samples on ``[0, t_end]``.

    Iterate ``k`` is placed at ``t = k / rho`` (no momentum) or
    ``t = k / sqrt(rho)`` (Nesterov or heavy-ball momentum) and compared
    with the matching flow started from ``x_0``. The flow step divides the
    iterate spacing and is at most ``h_max``. ``flow_alpha`` overrides the
    relaxation used by the flow (default ``config.alpha``).
    """
    from .solvers import run, replace_iters

    dt = 1.0 / config.rho if config.schedule == "none" else 1.0 / math.sqrt(config.rho)
    K = int(math.floor(t_end / dt + 1e-9))
    trace = run(problem, replace_iters(config, K), z_init, keep_iterates=True)
    xs = np.array(trace.iterates)
    m = max(1, math.ceil(dt / h_max - 1e-9))
    damping = _SCHEDULE_DAMPING[config.schedule]
    spec = FlowSpec(A, config.alpha if flow_alpha is None else flow_alpha, oracle, damping,
                    r=0.0 if damping == "first_order" else config.r)
    traj = integrate(spec, xs[0], K * dt, h=dt / m)
    if damping == "nesterov":
        # the flow starts at t = h, so sample j sits at t = (j + 1) h
        idx = np.maximum(np.arange(K + 1) * m - 1, 0)
    else:
        idx = np.arange(K + 1) * m
    return float(np.max(np.abs(xs - traj.X[idx])))


# ---------------------------------------------------------------- Lyapunov functions

LYAPUNOV_KINDS = ("radmm_convex", "radmm_strong", "nesterov_convex", "nesterov_strong",
                  "hb_convex", "hb_strong")
_NEEDS_VELOCITY = {"nesterov_convex", "nesterov_strong", "hb_convex", "hb_strong"}


@dataclass(frozen=True)
class LyapunovKind:
    """Which energy to evaluate, with the minimizer and optimal value it needs."""

    name: str
    x_star: np.ndarray
    phi_star: float

    def __post_init__(self):
        if self.name not in LYAPUNOV_KINDS:
            raise ValueError(f"unknown Lyapunov kind {self.name!r}; expected one of {LYAPUNOV_KINDS}")
        if self.x_star is None or self.phi_star is None:
            raise ValueError(f"{self.name} needs x_star and phi_star")


def lyapunov(traj: Trajectory, kind: LyapunovKind, spec: FlowSpec, smoothed: bool = False
             ) -> np.ndarray:
    """Evaluate the selected Lyapunov function at every sample.

    ``smoothed=True`` uses the Moreau-smoothed potential the integrator
    actually follows; pair it with the minimizer of that potential.
    """
    name = kind.name
    if name in _NEEDS_VELOCITY and traj.V is None:
        raise ValueError(f"{name} needs velocities; trajectory has none")
    alpha, r, A = spec.alpha, spec.r, spec.A
    t = traj.t
    gap = (traj.phi_eps if smoothed else traj.phi) - kind.phi_star
    dX = traj.X - np.asarray(kind.x_star, dtype=float)
    AdX = dX @ A.T
    dist = np.sum(AdX ** 2, axis=1)
    if name == "radmm_convex":
        return t / (2 - alpha) * gap + 0.5 * dist
    if name == "radmm_strong":
        return 0.5 * dist
    AV = traj.V @ A.T
    if name == "nesterov_convex":
        w = AdX + (t / (r - 1))[:, None] * AV
        return t ** 2 / ((r - 1) ** 2 * (2 - alpha)) * gap + 0.5 * np.sum(w ** 2, axis=1)
    if name == "nesterov_strong":
        lam = 2 * r / 3
        w = lam * AdX + t[:, None] * AV
        return t ** lam / (2 - alpha) * gap + 0.5 * t ** (lam - 2) * np.sum(w ** 2, axis=1)
    kin = np.sum(AV ** 2, axis=1)
    cross = np.sum(AdX * AV, axis=1)
    if name == "hb_convex":
        return t / (2 - alpha) * gap + 0.5 * r * dist + 0.5 * t * kin + cross
    return np.exp(2 * r * t / 3) * (gap / (2 - alpha) + r ** 2 / 9 * dist + 0.5 * kin
                                    + 2 * r / 3 * cross)


def max_relative_increase(values: np.ndarray) -> float:
    """Largest ``(E[i+1] - E[i]) / (1 + |E[i]|)`` (negative if strictly decreasing)."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return -np.inf
    return float(np.max(np.diff(values) / (1.0 + np.abs(values[:-1]))))


# ---------------------------------------------------------------- chain rule and energies

def _velocities(traj: Trajectory, spec: FlowSpec) -> tuple[np.ndarray, np.ndarray | None]:
    """Velocity and acceleration at every sample (acceleration from the ODE)."""
    force = np.array([spec.velocity_field(x) for x in traj.X])
    if traj.V is None:
        return force, None
    d = spec.damping_coefficient(traj.t)
    return traj.V, force - d[:, None] * traj.V


def phi_dot_residual(traj: Trajectory, spec: FlowSpec) -> np.ndarray:
    """``|dPhi/dt - predicted rate|`` at interior samples.

    ``dPhi/dt`` is a central difference of the potential samples; the
    prediction is ``-(2-alpha) ||A X'||^2`` (first order) or
    ``-(2-alpha) (<X'', M X'> + d(t) ||A X'||^2)`` (second order).
    """
    if len(traj) < 3:
        raise ValueError("phi_dot_residual needs at least 3 samples")
    vel, acc = _velocities(traj, spec)
    M = spec.mass
    phi = traj.phi_eps
    fd = (phi[2:] - phi[:-2]) / (traj.t[2:] - traj.t[:-2])
    kin = np.einsum("ij,jk,ik->i", vel, M, vel)
    if acc is None:
        rhs = -(2 - spec.alpha) * kin
    else:
        d = spec.damping_coefficient(traj.t)
        rhs = -(2 - spec.alpha) * (np.einsum("ij,jk,ik->i", acc, M, vel) + d * kin)
    return np.abs(fd - rhs[1:-1])


def hamiltonian_energy(traj: Trajectory, spec: FlowSpec, form: str = "conformal",
                       phi_star: float = 0.0, smoothed: bool = False) -> np.ndarray:
    """Hamiltonian along a second-order trajectory.

    ``conformal``: ``1/2 <P, M^-1 P> + lam (Phi - phi_star)`` with ``P = M X'``.
    ``time_dependent``: ``1/2 e^-eta <P, M^-1 P> + lam e^eta (Phi - phi_star)``
    with ``P = e^eta M X'``, ``eta = r log t`` (Nesterov) or ``r t``.
    Here ``M = A^T A`` and ``lam = 1 / (2 - alpha)``.
    """
    if traj.V is None:
        raise ValueError("hamiltonian_energy needs a second-order trajectory")
    lam = 1.0 / (2.0 - spec.alpha)
    pot = lam * ((traj.phi_eps if smoothed else traj.phi) - phi_star)
    kin = 0.5 * np.einsum("ij,jk,ik->i", traj.V, spec.mass, traj.V)
    if form == "conformal":
        return kin + pot
    if form != "time_dependent":
        raise ValueError(f"unknown form {form!r}")
    if spec.damping == "nesterov":
        e_eta = traj.t ** spec.r
    else:
        e_eta = np.exp(spec.r * traj.t)
    # 1/2 e^-eta <P, M^-1 P> with P = e^eta M V equals 1/2 e^eta <V, M V>
    return e_eta * (kin + pot)


def conformal_dissipation(traj: Trajectory, spec: FlowSpec) -> np.ndarray:
    """``-r <P, M^-1 P>`` with ``P = M X'``, the predicted ``dH/dt``."""
    return -spec.r * np.einsum("ij,jk,ik->i", traj.V, spec.mass, traj.V)


# ---------------------------------------------------------------- rates

@dataclass(frozen=True)
class RateFit:
    model: str
    coefficient: float
    exponent_or_rate: float
    window: tuple[float, float]
    goodness: float


def rate_fit(t, values, model: str = "power", window: tuple[float, float] | None = None
             ) -> RateFit:
    """Least-squares fit of ``c t^p`` (power) or ``c e^{-k t}`` (exponential).

    For the power model ``exponent_or_rate`` is ``p``; for the
    exponential model it is the decay rate ``k``.
    """
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = (t[0], t[-1]) if window is None else window
    if lo < t[0] - 1e-12 or hi > t[-1] + 1e-12:
        raise ValueError("window lies outside the series span")
    sel = (t >= lo) & (t <= hi)
    if np.count_nonzero(sel) < 10:
        raise ValueError("rate_fit needs at least 10 samples in the window")
    if np.any(values[sel] <= 0):
        raise ValueError("rate_fit needs positive values in the window")
    if model == "power":
        if np.any(t[sel] <= 0):
            raise ValueError("power fit needs t > 0")
        xs = np.log(t[sel])
    elif model == "exponential":
        xs = t[sel]
    else:
        raise ValueError(f"unknown model {model!r}")
    ys = np.log(values[sel])
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid ** 2)) / ss_tot
    rate = slope if model == "power" else -slope
    return RateFit(model=model, coefficient=float(np.exp(intercept)), exponent_or_rate=float(rate),
                   window=(float(lo), float(hi)), goodness=float(min(max(r2, 0.0), 1.0)))


CERTIFICATES = ("first_order_convex", "first_order_strong", "nesterov_convex",
                "nesterov_strong", "hb_convex", "hb_strong")


@dataclass(frozen=True)
class Certificate:
    """An observed error series against its theoretical upper bound."""

    name: str
    t: np.ndarray
    observed: np.ndarray
    bound: np.ndarray

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.observed / self.bound))

    def holds(self, slack: float = 0.05) -> bool:
        return bool(np.all(self.observed <= (1.0 + slack) * self.bound))


def nesterov_t0(spec: FlowSpec) -> float:
    """Start of the power-law certificate for strongly convex Nesterov flows."""
    return 2.0 / 3.0 * spec.sigma[0] * math.sqrt(spec.r * (spec.r - 3) * (2 - spec.alpha) / spec.mu)


def hb_convex_t0(spec: FlowSpec) -> float:
    """Time after which the heavy-ball convex Lyapunov function is nonincreasing."""
    return 1.5 / spec.r


def certificate(traj: Trajectory, spec: FlowSpec, name: str, x_star, phi_star: float,
                t_min: float = 0.0, smoothed: bool = False) -> Certificate:
    """Pointwise convergence bound for the flow that produced ``traj``.

    The function-value bounds compare ``Phi - phi_star``; the strongly
    convex ones compare ``||X - x_star||^2`` and need ``spec.mu``.
    Constants that depend on a later starting time (heavy-ball convex
    and Nesterov strongly convex) are evaluated from the trajectory at the
    first sample past that time.
    """
    if name not in CERTIFICATES:
        raise ValueError(f"unknown certificate {name!r}")
    if name.endswith("strong") and spec.mu is None:
        raise ValueError(f"{name} needs spec.mu")
    x_star = np.asarray(x_star, dtype=float)
    alpha, r, A = spec.alpha, spec.r, spec.A
    sig1, sign = spec.sigma
    t = traj.t
    gap = (traj.phi_eps if smoothed else traj.phi) - phi_star
    sq = np.sum((traj.X - x_star) ** 2, axis=1)
    d0 = float(np.sum((A @ (traj.X[0] - x_star)) ** 2))
    start = t_min
    if name == "first_order_convex":
        start = max(start, 1e-300)
        bound, obs = (2 - alpha) * d0 / (2 * np.maximum(t, 1e-300)), gap
    elif name == "first_order_strong":
        eta = spec.mu / ((2 - alpha) * sig1 ** 2)
        bound, obs = d0 * np.exp(-eta * t) / sign ** 2, sq
    elif name == "nesterov_convex":
        start = max(start, 1e-300)
        bound, obs = (2 - alpha) * (r - 1) ** 2 * d0 / (2 * t ** 2), gap
    elif name == "nesterov_strong":
        i0 = int(np.searchsorted(t, nesterov_t0(spec)))
        E0 = lyapunov(traj, LyapunovKind("nesterov_strong", x_star, phi_star), spec, smoothed)[i0]
        start = max(start, t[i0])
        bound, obs = 4 * (2 - alpha) * E0 / spec.mu * t ** (-2 * r / 3), sq
    elif name == "hb_convex":
        # E_hb_convex is nonincreasing only once t >= 3 / (2r): its
        # derivative carries (3/2 - r t) ||A X'||^2
        i0 = int(np.searchsorted(t, hb_convex_t0(spec) - 1e-12))
        c = lyapunov(traj, LyapunovKind("hb_convex", x_star, phi_star), spec, smoothed)[i0]
        start = max(start, t[i0])
        bound, obs = (2 - alpha) * c / np.maximum(t, 1e-300), gap
    else:
        if r > spec.r_bar() * (1 + 1e-12):
            raise ValueError(f"hb_strong certificate needs r <= r_bar = {spec.r_bar():.6g}")
        phi0 = gap[0]
        bound, obs = 6.0 / spec.mu * phi0 * np.exp(-2 * r * t / 3), sq
    sel = t >= start
    return Certificate(name=name, t=t[sel], observed=obs[sel], bound=bound[sel])


def stationary_point(oracle: SubgradientOracle, x0, tol: float = 1e-13, max_iter: int = 200
                     ) -> tuple[np.ndarray, float]:
    """Minimize the smoothed potential by damped Newton; returns ``(x, Phi_eps(x))``."""
    x = np.array(x0, dtype=float)
    f = oracle.smoothed_value
    for _ in range(max_iter):
        g = oracle.element(x)
        if np.linalg.norm(g) <= tol * (1.0 + np.linalg.norm(x)):
            break
        H = oracle.jacobian(x)
        try:
            delta = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            delta = -g
        if g @ delta >= 0:
            delta = -g
        f0, step = f(x), 1.0
        while step > 1e-14 and f(x + step * delta) > f0 + 1e-4 * step * (g @ delta):
            step *= 0.5
        x = x + step * delta
    return x, float(f(x))


def write_trajectory_csv(path, traj: Trajectory, series: dict[str, Sequence[float]] | None = None,
                         comment: str | None = None) -> str:
    return traj.to_csv(path, {k: np.asarray(v) for k, v in (series or {}).items()}, comment)
