"""Discretized integral operators on the curve grid.

A kernel surface k(t_i, t_j) together with the grid's quadrature weights
represents the operator f -> integral k(t, s) f(s) ds. Lagged covariance
estimators, the Hilbert-Schmidt norm, and an L2-orthonormal symmetric
eigensolver live here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import IncompatibleGridsError, InsufficientSampleError, NotSymmetricError
from .funcgrid import Curve, CurvePanel, Grid

__all__ = [
    "KernelOperator",
    "EigenSystem",
    "rank_one",
    "estimate_lagged_cov",
    "pooled_lagged_cov",
    "symmetrized_lagged_cov",
    "pooled_symmetrized_lagged_cov",
    "empirical_y_operator",
    "hs_norm",
    "eigendecompose",
]


@dataclass(frozen=True)
class KernelOperator:
    """Integral operator given by a kernel surface sampled on a grid."""

    grid: Grid
    kernel: np.ndarray  # (T, T), entry (i, j) = k(t_i, t_j)

    def __post_init__(self):
        k = np.ascontiguousarray(np.asarray(self.kernel, dtype=float))
        k.setflags(write=False)
        object.__setattr__(self, "kernel", k)
        T = self.grid.size
        if k.shape != (T, T):
            raise ValueError("kernel must be T x T for the grid")
        if not np.all(np.isfinite(k)):
            raise ValueError("kernel entries must be finite")

    def apply(self, f: Curve) -> Curve:
        """Quadrature application: (Af)(t_i) = sum_j w_j k(t_i, t_j) f(t_j)."""
        if f.grid != self.grid:
            raise IncompatibleGridsError("curve grid does not match operator grid")
        return Curve(self.grid, self.kernel @ (self.grid.weights * f.values))

    def _check_same(self, other: "KernelOperator") -> None:
        if self.grid != other.grid:
            raise IncompatibleGridsError("operators live on different grids")

    def __add__(self, other: "KernelOperator") -> "KernelOperator":
        self._check_same(other)
        return KernelOperator(self.grid, self.kernel + other.kernel)

    def __sub__(self, other: "KernelOperator") -> "KernelOperator":
        self._check_same(other)
        return KernelOperator(self.grid, self.kernel - other.kernel)

    def __mul__(self, c: float) -> "KernelOperator":
        return KernelOperator(self.grid, float(c) * self.kernel)

    __rmul__ = __mul__

    @property
    def transpose(self) -> "KernelOperator":
        return KernelOperator(self.grid, self.kernel.T)


@dataclass(frozen=True)
class EigenSystem:
    """Descending eigenvalues with L2-orthonormal eigenfunctions (rows of `vectors`)."""

    grid: Grid
    eigenvalues: np.ndarray  # (m,)
    vectors: np.ndarray  # (m, T)

    @property
    def eigenfunctions(self) -> list[Curve]:
        return [Curve(self.grid, row) for row in self.vectors]


def rank_one(y: Curve) -> KernelOperator:
    """Outer-product operator with kernel y(t) y(s)."""
    return KernelOperator(y.grid, np.outer(y.values, y.values))


def pooled_lagged_cov(panels: Sequence[CurvePanel], h: int) -> tuple[KernelOperator, KernelOperator]:
    """Lag-h covariance estimate pooled over disjoint stationary fragments.

    Pairs (X_k, X_{k+h}) are formed within each fragment only; the divisor is
    the total pair count. Returns the lag-h estimate and its transpose (the
    lag minus-h estimate).
    """
    if h < 0:
        raise ValueError("lag must be nonnegative")
    if not panels:
        raise InsufficientSampleError("no fragments given")
    grid = panels[0].grid
    for p in panels[1:]:
        if p.grid != grid:
            raise IncompatibleGridsError("fragments do not share a grid")
    pairs = sum(max(0, len(p) - h) for p in panels)
    if pairs == 0:
        raise InsufficientSampleError(f"lag {h} needs at least h+1 consecutive curves")
    acc = np.zeros((grid.size, grid.size))
    for p in panels:
        n = len(p)
        if n > h:
            acc += p.values[: n - h].T @ p.values[h:]
    acc /= pairs
    return KernelOperator(grid, acc), KernelOperator(grid, acc.T)


def estimate_lagged_cov(panel: CurvePanel, h: int) -> tuple[KernelOperator, KernelOperator]:
    """Lag-h covariance estimator pair for one stationary panel (zero-mean convention).

    kernel(i, j) = mean over k of X_k(t_i) X_{k+h}(t_j); the second element is
    its transpose. The panel mean is not subtracted.
    """
    if h >= len(panel):
        raise InsufficientSampleError(f"lag {h} requires more than {h} curves, got {len(panel)}")
    return pooled_lagged_cov([panel], h)


def symmetrized_lagged_cov(panel: CurvePanel, h: int) -> KernelOperator:
    """Sum of the lag-h estimate and its transpose; symmetric by construction."""
    fw, bw = estimate_lagged_cov(panel, h)
    return fw + bw


def pooled_symmetrized_lagged_cov(panels: Sequence[CurvePanel], h: int) -> KernelOperator:
    fw, bw = pooled_lagged_cov(panels, h)
    return fw + bw


def empirical_y_operator(ys: Sequence[Curve], h: int) -> KernelOperator:
    """Symmetrized lag-h outer-product average of a query block of curves."""
    if h < 0:
        raise ValueError("lag must be nonnegative")
    if len(ys) < h + 1:
        raise InsufficientSampleError(f"a lag-{h} query needs at least {h + 1} curves, got {len(ys)}")
    grid = ys[0].grid
    for y in ys[1:]:
        if y.grid != grid:
            raise IncompatibleGridsError("query curves do not share a grid")
    m = len(ys) - h
    acc = np.zeros((grid.size, grid.size))
    for k in range(m):
        acc += np.outer(ys[k].values, ys[k + h].values)
    acc /= m
    return KernelOperator(grid, acc + acc.T)


def hs_norm(op: KernelOperator) -> float:
    """Hilbert-Schmidt norm: the quadrature L2 norm of the kernel surface."""
    sw = np.sqrt(op.grid.weights)
    return float(np.linalg.norm(sw[:, None] * op.kernel * sw[None, :]))


def _sign_normalize(vectors: np.ndarray) -> np.ndarray:
    """Flip rows so each eigenfunction's largest-magnitude coordinate is positive."""
    idx = np.argmax(np.abs(vectors), axis=1)
    signs = np.sign(vectors[np.arange(vectors.shape[0]), idx])
    signs[signs == 0] = 1.0
    return vectors * signs[:, None]


def _tie_stable_order(eigenvalues: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Descending order; exact ties broken by the first differing eigenfunction coordinate."""
    order = np.argsort(-eigenvalues, kind="stable")
    lam = eigenvalues[order]
    start = 0
    while start < lam.size:
        end = start + 1
        while end < lam.size and lam[end] == lam[start]:
            end += 1
        if end - start > 1:
            block = order[start:end]
            keyed = sorted(block, key=lambda i: tuple(vectors[i]))
            order[start:end] = keyed
        start = end
    return order


def eigendecompose(op: KernelOperator, max_rank: int | None = None) -> EigenSystem:
    """L2-orthonormal eigendecomposition of a symmetric kernel operator.

    The weighted similarity transform diag(sqrt(w)) K diag(sqrt(w)) turns the
    quadrature eigenproblem into an ordinary symmetric one; eigenvectors are
    mapped back by diag(1/sqrt(w)), which makes them orthonormal under the
    grid inner product. Eigenvalues come back in descending order with a
    deterministic sign convention.
    """
    K = op.kernel
    tol = 1e-8 * max(1.0, float(np.abs(K).max()))
    if float(np.abs(K - K.T).max()) > tol:
        raise NotSymmetricError("kernel is not symmetric within tolerance")
    sw = np.sqrt(op.grid.weights)
    M = sw[:, None] * (0.5 * (K + K.T)) * sw[None, :]
    lam, U = np.linalg.eigh(M)
    vectors = _sign_normalize(U.T / sw[None, :])
    order = _tie_stable_order(lam, vectors)
    lam, vectors = lam[order], vectors[order]
    if max_rank is not None:
        lam, vectors = lam[:max_rank], vectors[:max_rank]
    return EigenSystem(op.grid, lam, vectors)
