"""Proximal operators and Moreau-smoothed subgradient oracles.

A prox operator here is any callable ``prox(v, kappa)`` returning
``argmin_u h(u) + ||u - v||^2 / (2 kappa)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .numerics import svd

ProxOperator = Callable[[np.ndarray, float], np.ndarray]


def soft_threshold(v, kappa: float) -> np.ndarray:
    """Prox of ``kappa * ||.||_1``: ``sign(v) * max(|v| - kappa, 0)``."""
    if kappa < 0:
        raise ValueError(f"soft_threshold: kappa must be >= 0, got {kappa}")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - kappa, 0.0)


def singular_value_threshold(M, kappa: float) -> np.ndarray:
    """Prox of ``kappa * ||.||_*`` (soft-threshold the singular values)."""
    if kappa < 0:
        raise ValueError(
            f"singular_value_threshold: kappa must be >= 0, got {kappa}")
    U, S, V = svd(M)
    S = np.maximum(S - kappa, 0.0)
    keep = S > 0
    return (U[:, keep] * S[keep]) @ V[:, keep].T


def prox_l1(weight: float = 1.0) -> ProxOperator:
    """Prox operator of ``weight * ||.||_1``.

    The returned function carries a closed-form ``moreau_gradient``
    attribute, ``clip(v / eps, -weight, weight)``, which
    :func:`moreau_gradient` and the composite oracle use in place of the
    generic ``(v - prox(v, eps)) / eps``.
    """
    def prox(v, kappa):
        return soft_threshold(v, weight * kappa)

    def grad(v, epsilon):
        return np.minimum(np.maximum(v / epsilon, -weight), weight)

    prox.moreau_gradient = grad
    return prox


def prox_nuclear(weight: float = 1.0) -> ProxOperator:
    return lambda M, kappa: singular_value_threshold(M, weight * kappa)


def prox_sq_norm(weight: float = 1.0, center=0.0) -> ProxOperator:
    """Prox operator of ``(weight / 2) ||u - center||^2``."""
    def prox(v, kappa):
        return (np.asarray(v, dtype=float) + weight * kappa * center) / (1.0 + weight * kappa)
    return prox


def prox_zero(v, kappa: float) -> np.ndarray:
    """Prox of the zero function (identity)."""
    return np.array(v, dtype=float, copy=True)


def nuclear_norm(M) -> float:
    return float(np.sum(np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False)))


def moreau_gradient(prox: ProxOperator, v, epsilon: float) -> np.ndarray:
    """Gradient of the Moreau envelope ``(v - prox(v, eps)) / eps``."""
    if not epsilon > 0:
        raise ValueError(f"moreau_gradient: epsilon must be > 0, got {epsilon}")
    v = np.asarray(v, dtype=float)
    closed_form = getattr(prox, "moreau_gradient", None)
    if closed_form is not None:
        return closed_form(v, epsilon)
    return (v - prox(v, epsilon)) / epsilon


def moreau_envelope(value: Callable, prox: ProxOperator, v, epsilon: float) -> float:
    """Value of the Moreau envelope ``min_u h(u) + ||u - v||^2 / (2 eps)``."""
    v = np.asarray(v, dtype=float)
    p = prox(v, epsilon)
    return float(value(p) + np.sum((v - p) ** 2) / (2.0 * epsilon))


@dataclass(frozen=True)
class NonsmoothTerm:
    """A term ``h(B x)`` of a composite objective, accessed through its prox.

    ``separable`` marks a prox acting componentwise, which lets the oracle
    Jacobian be formed from one perturbation instead of one per coordinate.
    ``B=None`` means the identity.
    """

    value: Callable[[np.ndarray], float]
    prox: ProxOperator
    B: np.ndarray | None = None
    separable: bool = False

    def apply(self, x):
        return x if self.B is None else self.B @ x

    def adjoint(self, y):
        return y if self.B is None else self.B.T @ y


@dataclass(frozen=True)
class SubgradientOracle:
    """Value and subgradient-selection oracle for ``Phi = s + sum_j h_j(B_j x)``.

    ``value`` is the exact ``Phi``; ``element`` returns the gradient of the
    smoothed surrogate ``Phi_eps`` in which each nonsmooth ``h_j`` is
    replaced by its Moreau envelope with parameter ``epsilon``. As
    ``epsilon -> 0`` this selects the minimal-norm element of the
    subdifferential. ``smoothed_value`` evaluates ``Phi_eps`` and
    ``jacobian`` its (generalized) Hessian.
    """

    value: Callable[[np.ndarray], float]
    element: Callable[[np.ndarray], np.ndarray]
    smoothed_value: Callable[[np.ndarray], float]
    jacobian: Callable[[np.ndarray], np.ndarray]
    epsilon: float
    smooth: bool = False


def _fd_step(epsilon: float) -> float:
    return 1e-3 * epsilon


def composite_oracle(
    smooth_value: Callable[[np.ndarray], float] | None = None,
    smooth_grad: Callable[[np.ndarray], np.ndarray] | None = None,
    smooth_hess: Callable[[np.ndarray], np.ndarray] | None = None,
    terms: Sequence[NonsmoothTerm] = (),
    epsilon: float = 1e-4,
) -> SubgradientOracle:
    """Build a :class:`SubgradientOracle` from a smooth part and prox terms."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    terms = tuple(terms)

    def _grad_of(term):
        closed_form = getattr(term.prox, "moreau_gradient", None)
        if closed_form is not None:
            return lambda v: closed_form(v, epsilon)
        return lambda v: (v - term.prox(v, epsilon)) / epsilon

    # element() is the hot path of flow integration, so resolve each
    # term's gradient rule once
    term_grads = tuple((term, _grad_of(term)) for term in terms)

    def value(x):
        x = np.asarray(x, dtype=float)
        out = 0.0 if smooth_value is None else float(smooth_value(x))
        for term in terms:
            out += float(term.value(term.apply(x)))
        return out

    def smoothed_value(x):
        x = np.asarray(x, dtype=float)
        out = 0.0 if smooth_value is None else float(smooth_value(x))
        for term in terms:
            out += moreau_envelope(term.value, term.prox, term.apply(x), epsilon)
        return out

    def element(x):
        x = np.asarray(x, dtype=float)
        g = np.zeros_like(x) if smooth_grad is None else np.asarray(smooth_grad(x), dtype=float)
        for term, grad in term_grads:
            g = g + term.adjoint(grad(term.apply(x)))
        return g

    def jacobian(x):
        x = np.asarray(x, dtype=float)
        n = x.size
        J = np.zeros((n, n)) if smooth_hess is None else np.array(smooth_hess(x), dtype=float)
        delta = _fd_step(epsilon)
        for term in terms:
            v = term.apply(x)
            if term.separable:
                # prox is piecewise smooth; its slope is read off one
                # symmetric perturbation of every coordinate at once
                dp = (term.prox(v + delta, epsilon) - term.prox(v - delta, epsilon)) / (2 * delta)
                d = (1.0 - dp) / epsilon
                B = np.eye(n) if term.B is None else term.B
                J += B.T @ (d[:, None] * B)
            else:
                m = v.size
                H = np.empty((m, m))
                for i in range(m):
                    e = np.zeros(m)
                    e[i] = delta
                    H[:, i] = (moreau_gradient(term.prox, v + e, epsilon)
                               - moreau_gradient(term.prox, v - e, epsilon)) / (2 * delta)
                B = np.eye(n) if term.B is None else term.B
                J += B.T @ H @ B
        return J

    return SubgradientOracle(value=value, element=element, smoothed_value=smoothed_value,
                             jacobian=jacobian, epsilon=float(epsilon), smooth=not terms)
