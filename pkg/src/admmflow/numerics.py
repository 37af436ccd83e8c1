"""Dense and banded linear algebra used by the solvers and flows.

Matrices are plain 2-D ``numpy.ndarray`` objects. The shifted-Gram cache
factorizes ``Q + rho * A.T @ A`` once and reuses the factor for every
x-update; when the Gram matrix is narrow-banded (second differences give a
pentadiagonal one) the factor is a banded Cholesky.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import linalg


class DimensionError(ValueError):
    """Raised when array shapes do not match an operation's contract."""


class DegenerateMatrixError(ValueError):
    """Raised for zero or otherwise unusable matrices."""


def second_difference_matrix(n: int) -> np.ndarray:
    """Return the ``(n-2) x n`` second-difference Toeplitz matrix.

    Row ``i`` holds ``(1, -2, 1)`` in columns ``i, i+1, i+2``.
    """
    if n < 3:
        raise DimensionError(f"second_difference_matrix needs n >= 3, got {n}")
    D = np.zeros((n - 2, n))
    idx = np.arange(n - 2)
    D[idx, idx] = 1.0
    D[idx, idx + 1] = -2.0
    D[idx, idx + 2] = 1.0
    return D


def _bandwidth(G: np.ndarray) -> int:
    rows, cols = np.nonzero(G)
    if rows.size == 0:
        return 0
    return int(np.max(np.abs(rows - cols)))


@dataclass(frozen=True)
class GramSolveCache:
    """Factorization of ``Q + rho * A^T A`` for repeated solves.

    ``Q`` defaults to the identity, which is the case needed by the
    trend-filtering x-update. Build instances with :meth:`build`.
    """

    rho: float
    dim: int
    banded: bool
    factor: tuple = field(repr=False)

    @classmethod
    def build(cls, A: np.ndarray, rho: float, Q: np.ndarray | None = None,
              max_band_fraction: float = 0.125) -> "GramSolveCache":
        A = np.asarray(A, dtype=float)
        if A.ndim != 2:
            raise DimensionError("A must be a 2-D array")
        if rho < 0:
            raise ValueError(f"rho must be >= 0, got {rho}")
        n = A.shape[1]
        G = rho * (A.T @ A)
        if Q is None:
            G[np.diag_indices(n)] += 1.0
        else:
            Q = np.asarray(Q, dtype=float)
            if Q.shape != (n, n):
                raise DimensionError(f"Q has shape {Q.shape}, expected {(n, n)}")
            G = G + Q
        bw = _bandwidth(G)
        if n > 8 and bw <= max_band_fraction * n:
            # upper banded storage: ab[bw + i - j, j] = G[i, j]
            ab = np.zeros((bw + 1, n))
            for d in range(bw + 1):
                ab[bw - d, d:] = np.diagonal(G, offset=d)
            cb = linalg.cholesky_banded(ab, lower=False)
            return cls(rho=float(rho), dim=n, banded=True, factor=(cb,))
        c, low = linalg.cho_factor(G)
        return cls(rho=float(rho), dim=n, banded=False, factor=(c, low))

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return solve_shifted_gram(self, rhs)


def solve_shifted_gram(cache: GramSolveCache, rhs: np.ndarray) -> np.ndarray:
    """Solve ``(Q + rho A^T A) x = rhs`` with a prebuilt factorization."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != cache.dim:
        raise DimensionError(
            f"rhs has length {rhs.shape[0]}, factorization has dim {cache.dim}")
    if cache.banded:
        return linalg.cho_solve_banded((cache.factor[0], False), rhs)
    return linalg.cho_solve(cache.factor, rhs)


class SVDResult(NamedTuple):
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray


def svd(M: np.ndarray) -> SVDResult:
    """Thin SVD ``M = U @ diag(S) @ V.T`` with ``S`` nonincreasing.

    Note that ``V`` is returned with singular vectors as columns, unlike
    ``numpy.linalg.svd`` which returns ``V.T``.
    """
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError("svd: matrix has non-finite entries")
    U, S, Vt = np.linalg.svd(M, full_matrices=False)
    return SVDResult(U, S, Vt.T)


def spectral_bounds(A: np.ndarray) -> tuple[float, float]:
    """Largest and smallest singular values ``(sigma_1, sigma_n)`` of A."""
    A = np.asarray(A, dtype=float)
    if not np.any(A):
        raise DegenerateMatrixError("spectral_bounds of a zero matrix")
    S = np.linalg.svd(A, compute_uv=False)
    return float(S[0]), float(S[-1])


def write_matrix(path: str | Path, M: np.ndarray) -> None:
    """Write ``M`` as text: ``rows cols`` then one row per line."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    rows, cols = M.shape
    lines = [f"{rows} {cols}"]
    lines.extend(" ".join(repr(float(v)) for v in row) for row in M)
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix(path: str | Path) -> np.ndarray:
    tokens = Path(path).read_text().split()
    if len(tokens) < 2:
        raise ValueError(f"{path}: missing 'rows cols' header")
    rows, cols = int(tokens[0]), int(tokens[1])
    values = np.array([float(t) for t in tokens[2:]])
    if values.size != rows * cols:
        raise ValueError(
            f"{path}: expected {rows * cols} entries, found {values.size}")
    return values.reshape(rows, cols)
