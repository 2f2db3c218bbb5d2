"""Discretized functions on [0, 1]: grids, quadrature, bases, band projection.

Curves are stored as values on a shared grid; inner products and norms are
trapezoidal quadrature sums, which are exact for piecewise-linear integrands.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline
from scipy.linalg import solve

from .errors import DegenerateCurveError, IncompatibleGridsError

__all__ = [
    "Grid",
    "Curve",
    "CurvePanel",
    "BasisSet",
    "make_uniform_grid",
    "inner_product",
    "l2_norm",
    "panel_norms",
    "scale_to_unit",
    "fourier_basis",
    "bspline_basis",
    "bandpass_project",
    "concat_channels",
]


def _frozen_array(x, dtype=float, ndim=1) -> np.ndarray:
    a = np.asarray(x, dtype=dtype)
    if a.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {a.shape}")
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid:
    """Quadrature grid on [0, 1]: strictly increasing points and positive weights summing to 1."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = _frozen_array(self.points)
        wts = _frozen_array(self.weights)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)
        if pts.size < 2 or pts.size != wts.size:
            raise ValueError("grid needs at least 2 points and matching weights")
        if not (np.all(np.diff(pts) > 0) and pts[0] == 0.0 and pts[-1] == 1.0):
            raise ValueError("grid points must be strictly increasing from 0 to 1")
        if not np.all(wts > 0):
            raise ValueError("quadrature weights must be positive")
        if abs(float(wts.sum()) - 1.0) > 1e-10:
            raise ValueError("quadrature weights must sum to 1")

    @property
    def size(self) -> int:
        return self.points.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, Grid):
            return NotImplemented
        return (
            self.points.shape == other.points.shape
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self):
        return hash((self.points.tobytes(), self.weights.tobytes()))


@dataclass(frozen=True)
class Curve:
    """One function sampled on a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen_array(self.values)
        object.__setattr__(self, "values", vals)
        if vals.size != self.grid.size:
            raise ValueError("curve length does not match its grid")
        if not np.all(np.isfinite(vals)):
            raise ValueError("curve values must be finite")


@dataclass(frozen=True)
class CurvePanel:
    """Ordered sample of curves on one shared grid; row k is the k-th curve in time order."""

    grid: Grid
    values: np.ndarray  # (n_curves, T)
    group_label: int | None = None

    def __post_init__(self):
        vals = _frozen_array(self.values, ndim=2)
        object.__setattr__(self, "values", vals)
        if vals.shape[1] != self.grid.size:
            raise ValueError("panel width does not match its grid")
        if not np.all(np.isfinite(vals)):
            raise ValueError("panel values must be finite")

    @classmethod
    def from_curves(cls, curves: list[Curve], group_label: int | None = None) -> "CurvePanel":
        if not curves:
            raise ValueError("empty curve list")
        grid = curves[0].grid
        for c in curves[1:]:
            if c.grid != grid:
                raise IncompatibleGridsError("curves do not share a grid")
        return cls(grid, np.stack([c.values for c in curves]), group_label)

    def curve(self, k: int) -> Curve:
        return Curve(self.grid, self.values[k])

    @property
    def curves(self) -> list[Curve]:
        return [Curve(self.grid, row) for row in self.values]

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class BasisSet:
    """Evaluated basis functions, one per row."""

    kind: str  # "fourier" | "bspline"
    size: int
    evaluations: np.ndarray  # (size, T)
    grid: Grid

    def __post_init__(self):
        ev = _frozen_array(self.evaluations, ndim=2)
        object.__setattr__(self, "evaluations", ev)
        if ev.shape != (self.size, self.grid.size):
            raise ValueError("basis evaluations must be size x T")

    def curve(self, j: int) -> Curve:
        return Curve(self.grid, self.evaluations[j])


def make_uniform_grid(num_points: int) -> Grid:
    """Equally spaced grid on [0, 1] with trapezoidal quadrature weights."""
    if num_points < 2:
        raise ValueError("a grid needs at least 2 points")
    pts = np.linspace(0.0, 1.0, num_points)
    wts = np.full(num_points, 1.0 / (num_points - 1))
    wts[0] *= 0.5
    wts[-1] *= 0.5
    return Grid(pts, wts)


def _check_same_grid(x: Curve, y: Curve) -> None:
    if x.grid != y.grid:
        raise IncompatibleGridsError("curves live on different grids")


def inner_product(x: Curve, y: Curve) -> float:
    """Quadrature approximation of the L2 inner product of two curves."""
    _check_same_grid(x, y)
    return float(np.sum(x.grid.weights * x.values * y.values))


def l2_norm(x: Curve) -> float:
    """Quadrature L2 norm of a curve."""
    return float(np.sqrt(np.sum(x.grid.weights * x.values**2)))


def panel_norms(panel: CurvePanel) -> np.ndarray:
    """L2 norm of every curve in a panel."""
    return np.sqrt(panel.values**2 @ panel.grid.weights)


def scale_to_unit(panel: CurvePanel) -> CurvePanel:
    """Divide each curve by its own L2 norm.

    Raises DegenerateCurveError naming the first zero-norm curve.
    """
    norms = panel_norms(panel)
    bad = np.flatnonzero(norms == 0.0)
    if bad.size:
        raise DegenerateCurveError(f"curve {bad[0]} has zero norm and cannot be scaled")
    return CurvePanel(panel.grid, panel.values / norms[:, None], panel.group_label)


def fourier_basis(grid: Grid, size: int) -> BasisSet:
    """First `size` Fourier functions: 1, then sqrt(2)cos(2*pi*j*t), sqrt(2)sin(2*pi*j*t) for j = 1, 2, ..."""
    if size < 1:
        raise ValueError("basis size must be at least 1")
    t = grid.points
    rows = np.empty((size, grid.size))
    rows[0] = 1.0
    for r in range(1, size):
        j = (r + 1) // 2
        phase = 2.0 * np.pi * j * t
        rows[r] = np.sqrt(2.0) * (np.cos(phase) if r % 2 == 1 else np.sin(phase))
    return BasisSet("fourier", size, rows, grid)


def bspline_basis(grid: Grid, size: int, degree: int = 3) -> BasisSet:
    """`size` B-splines of the given degree on clamped equally spaced knots over [0, 1]."""
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    n_interior = size - degree - 1
    if n_interior < 0:
        raise ValueError(f"{size} basis functions need degree <= {size - 1}")
    interior = np.linspace(0.0, 1.0, n_interior + 2)[1:-1]
    knots = np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])
    design = BSpline.design_matrix(grid.points, knots, degree, extrapolate=False).toarray()
    return BasisSet("bspline", size, design.T, grid)


def _band_rows(grid: Grid, freq_lo: int, freq_hi: int) -> np.ndarray:
    t = grid.points
    rows = []
    for k in range(freq_lo, freq_hi + 1):
        rows.append(np.sqrt(2.0) * np.cos(2.0 * np.pi * k * t))
        rows.append(np.sqrt(2.0) * np.sin(2.0 * np.pi * k * t))
    return np.stack(rows)


def bandpass_project(x: Curve, freq_lo: int, freq_hi: int) -> Curve:
    """L2 projection of a curve onto the Fourier span of frequencies freq_lo..freq_hi.

    Solves the Gram system of the band functions under the grid quadrature, so
    the projection is idempotent even when quadrature slightly de-orthonormalizes
    the band.
    """
    T = x.grid.size
    if not (1 <= freq_lo <= freq_hi) or 2 * freq_hi >= T:
        raise ValueError(f"band [{freq_lo}, {freq_hi}] out of range for a {T}-point grid")
    rows = _band_rows(x.grid, freq_lo, freq_hi)
    weighted = rows * x.grid.weights
    gram = weighted @ rows.T
    coef = solve(gram, weighted @ x.values, assume_a="sym")
    return Curve(x.grid, coef @ rows)


def concat_channels(panels: list[CurvePanel], k: int) -> Curve:
    """Stack the k-th curve of every channel end-to-end on a fresh uniform grid over [0, 1]."""
    if not panels:
        raise ValueError("no channels given")
    first = panels[0]
    for p in panels[1:]:
        if p.grid != first.grid or len(p) != len(first):
            raise IncompatibleGridsError("channels must share grid and length")
    if not 0 <= k < len(first):
        raise ValueError(f"curve index {k} out of range")
    values = np.concatenate([p.values[k] for p in panels])
    return Curve(make_uniform_grid(values.size), values)
