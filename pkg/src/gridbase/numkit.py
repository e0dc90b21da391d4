"""Dense linear algebra and derivative-verification helpers.

Matrices are plain 2-D float ndarrays (row-major, finite entries). The
least-squares solve goes through an SVD rather than the normal equations,
so ill-conditioned systems are handled gracefully and rank deficiency is
detected instead of amplified.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

# Relative singular-value cutoff below which a system is declared
# rank-deficient (no regularization is attempted past this point).
RANK_RTOL = 1e-10


def check_matrix(a, *, square: bool = False) -> np.ndarray:
    """Validate and return `a` as a finite 2-D float array."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={a.ndim}")
    if not np.isfinite(a).all():
        raise ValueError("matrix contains non-finite entries")
    if square and a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class LeastSquaresSolution:
    """Minimum-norm least-squares solution of G x = d.

    `normal_residual` is ||G^T (G x - d)||_2; `rank_ok` is False when the
    column rank of G fell below the RANK_RTOL cutoff.
    """

    solution: np.ndarray
    normal_residual: float
    rank_ok: bool


def least_squares_apply(G, d) -> LeastSquaresSolution:
    """Solve min ||G x - d||_2 via SVD (pseudoinverse application).

    G must have at least as many rows as columns; d must match G's rows
    (a 2-D d solves one system per column).
    Rank deficiency does not raise here: callers inspect `rank_ok`.
    """
    G = check_matrix(G)
    d = np.asarray(d, dtype=float)
    if d.ndim not in (1, 2) or d.shape[0] != G.shape[0]:
        raise ValueError(
            f"rhs shape {d.shape} does not match matrix rows {G.shape[0]}"
        )
    if G.shape[0] < G.shape[1]:
        raise ValueError(f"matrix {G.shape} has fewer rows than columns")

    U, s, Vt = np.linalg.svd(G, full_matrices=False)
    cutoff = RANK_RTOL * (s[0] if s.size else 0.0)
    rank_ok = bool(s.size and s[-1] > cutoff)
    inv_s = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    coeff = U.T @ d
    x = Vt.T @ (inv_s[:, None] * coeff if d.ndim == 2 else inv_s * coeff)
    normal_residual = float(np.linalg.norm(G.T @ (G @ x - d)))
    return LeastSquaresSolution(solution=x, normal_residual=normal_residual,
                                rank_ok=rank_ok)


def spectral_norm(A) -> float:
    """Largest |eigenvalue| of a symmetric matrix (full eigendecomposition)."""
    A = check_matrix(A, square=True)
    if A.size == 0:
        return 0.0
    scale = np.abs(A).max()
    if scale > 0 and np.abs(A - A.T).max() > 1e-10 * scale:
        raise ValueError("matrix is not symmetric; symmetrize before calling")
    return float(np.abs(np.linalg.eigvalsh(A)).max())


def default_fd_steps(x: np.ndarray, scale: float = 1e-4) -> np.ndarray:
    """Per-coordinate central-difference step, h_i = scale * max(1, |x_i|)."""
    x = np.asarray(x, dtype=float)
    return scale * np.maximum(1.0, np.abs(x))


def fd_gradient(f: Callable[[np.ndarray], float], x,
                steps: Sequence[float] | np.ndarray | None = None) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    h = default_fd_steps(x) if steps is None else np.asarray(steps, dtype=float)
    if np.any(h <= 0):
        raise ValueError("finite-difference steps must be positive")
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        fp = f(x + e)
        fm = f(x - e)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise ValueError(f"non-finite function value at stencil for coordinate {i}")
        g[i] = (fp - fm) / (2.0 * h[i])
    return g


def fd_hessian(f: Callable[[np.ndarray], float], x,
               steps: Sequence[float] | np.ndarray | None = None) -> np.ndarray:
    """Symmetrized central-difference Hessian of a scalar function."""
    x = np.asarray(x, dtype=float)
    h = default_fd_steps(x) if steps is None else np.asarray(steps, dtype=float)
    if np.any(h <= 0):
        raise ValueError("finite-difference steps must be positive")
    n = x.size
    H = np.empty((n, n))
    f0 = f(x)
    if not np.isfinite(f0):
        raise ValueError("non-finite function value at the expansion point")
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        fpp = f(x + 2 * ei)
        fmm = f(x - 2 * ei)
        if not (np.isfinite(fpp) and np.isfinite(fmm)):
            raise ValueError(f"non-finite function value at stencil for coordinate {i}")
        H[i, i] = (fpp - 2.0 * f0 + fmm) / (4.0 * h[i] ** 2)
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h[j]
            vals = [f(x + ei + ej), f(x + ei - ej), f(x - ei + ej), f(x - ei - ej)]
            if not np.all(np.isfinite(vals)):
                raise ValueError(
                    f"non-finite function value at stencil for coordinates ({i}, {j})"
                )
            H[i, j] = H[j, i] = (vals[0] - vals[1] - vals[2] + vals[3]) / (4.0 * h[i] * h[j])
    return 0.5 * (H + H.T)
