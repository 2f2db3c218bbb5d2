"""Classification under covariance change-points.

A curve sequence is modeled as piecewise-stationary segments, each with its
own lag-0 covariance operator. A permutation-calibrated CUSUM scan over the
per-curve outer-product surfaces plays the role of the break detector (the
registry also accepts externally supplied break indices), and queries are
classified against the nearest segment operator of each group.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import IncompatibleGridsError, InsufficientSampleError, NoDiscrepancyError
from .classifier import DiscriminativeBasis, _basis_from_difference, score_matrix, select_dim
from .funcgrid import Curve, CurvePanel, Grid
from .operators import KernelOperator, estimate_lagged_cov, hs_norm, rank_one

__all__ = [
    "SegmentRegistry",
    "BreakReport",
    "detect_breaks",
    "build_registry",
    "classify_with_segments",
]


@dataclass(frozen=True)
class BreakReport:
    """Detected break indices with their scan statistics and permutation p-values.

    Break index k means a new segment starts after the k-th curve (1-based).
    """

    breaks: tuple[int, ...]
    statistics: tuple[float, ...]
    p_values: tuple[float, ...]
    level: float


@dataclass(frozen=True)
class SegmentRegistry:
    """Per-group segment boundaries and lag-0 covariance operators.

    `boundaries` holds 0 = b_0 < b_1 < ... < b_L+1 = n; segment l covers
    curves b_l..b_{l+1}-1 (0-based, half-open).
    """

    grid: Grid
    boundaries: tuple[int, ...]
    operators: tuple[KernelOperator, ...]

    def __post_init__(self):
        b = self.boundaries
        if len(b) < 2 or b[0] != 0 or any(b[i] >= b[i + 1] for i in range(len(b) - 1)):
            raise ValueError("boundaries must strictly increase from 0 to the panel length")
        if len(self.operators) != len(b) - 1:
            raise ValueError("one operator per segment required")

    @property
    def n_segments(self) -> int:
        return len(self.operators)


def _pairwise_hs_gram(panels: Sequence[CurvePanel]) -> np.ndarray:
    """G[i, j] = <Z_i, Z_j>_HS for Z_i = sum over channels of X_i (x) X_i."""
    grid = panels[0].grid
    n = len(panels[0])
    G = np.zeros((n, n))
    for a in panels:
        for b in panels:
            m = (a.values * grid.weights) @ b.values.T
            G += m**2
    return G


def _cusum_curve(G: np.ndarray) -> np.ndarray:
    """Squared CUSUM norms T_k^2 for every split k = 1..n-1 from the HS Gram matrix."""
    n = G.shape[0]
    row_cum = np.cumsum(G.sum(axis=1))  # R_k = sum_{i<=k, all j}
    total = row_cum[-1]
    diag_cum = np.cumsum(np.diag(G))
    # Q_k = sum_{i,j<=k} G_ij via Q_k = Q_{k-1} + 2 * sum_{i<k} G_ik + G_kk
    partial = np.cumsum(np.tril(G, -1).sum(axis=1))
    q = diag_cum + 2.0 * partial
    k = np.arange(1, n + 1)
    t2 = (q - 2.0 * (k / n) * row_cum + (k / n) ** 2 * total) / n**2
    return t2[:-1]  # split after curve k is only meaningful for k < n


def _scan_segment(G: np.ndarray, lo: int, hi: int, min_seg: int) -> tuple[int, float] | None:
    """Best split of curves lo..hi-1 keeping both sides >= min_seg; None if too short."""
    n = hi - lo
    if n < 2 * min_seg:
        return None
    t2 = _cusum_curve(G[lo:hi, lo:hi])
    window = t2[min_seg - 1 : n - min_seg]
    best = int(np.argmax(window)) + min_seg - 1
    return lo + best + 1, float(np.sqrt(t2[best]))


def _permutation_pvalue(
    G: np.ndarray, lo: int, hi: int, min_seg: int, stat: float, permutations: int, rng: np.random.Generator
) -> float:
    exceed = 0
    idx = np.arange(lo, hi)
    for _ in range(permutations):
        perm = rng.permutation(idx)
        sub = G[np.ix_(perm, perm)]
        t2 = _cusum_curve(sub)
        window = t2[min_seg - 1 : (hi - lo) - min_seg]
        if float(np.sqrt(window.max())) >= stat:
            exceed += 1
    return (1.0 + exceed) / (1.0 + permutations)


def detect_breaks(
    panel: CurvePanel | Sequence[CurvePanel],
    level: float = 0.05,
    min_seg: int = 20,
    permutations: int = 200,
    rng_seed: int = 0,
) -> BreakReport:
    """Binary-segmentation scan for breaks in the covariance surface sequence.

    The statistic at split k is the quadrature HS norm of the centered partial
    sum of outer-product surfaces; significance is calibrated by permuting the
    curve order within the scanned stretch. Passing a list of panels sums the
    per-channel surfaces before scanning. Recursion continues while the
    permutation p-value stays at or below `level` and both sides can still
    hold `min_seg` curves.
    """
    panels = [panel] if isinstance(panel, CurvePanel) else list(panel)
    grid = panels[0].grid
    n = len(panels[0])
    for p in panels:
        if p.grid != grid or len(p) != n:
            raise IncompatibleGridsError("channels must share grid and length")
    if permutations < 1:
        raise ValueError("permutations must be at least 1")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    if n < 2 * min_seg:
        raise InsufficientSampleError(f"need at least {2 * min_seg} curves, got {n}")
    G = _pairwise_hs_gram(panels)
    rng = np.random.default_rng(np.random.SeedSequence((rng_seed, n)))
    found: list[tuple[int, float, float]] = []
    stack = [(0, n)]
    while stack:
        lo, hi = stack.pop()
        best = _scan_segment(G, lo, hi, min_seg)
        if best is None:
            continue
        split, stat = best
        pval = _permutation_pvalue(G, lo, hi, min_seg, stat, permutations, rng)
        if pval <= level:
            found.append((split, stat, pval))
            stack.append((lo, split))
            stack.append((split, hi))
    found.sort()
    return BreakReport(
        tuple(k for k, _, _ in found),
        tuple(s for _, s, _ in found),
        tuple(p for _, _, p in found),
        level,
    )


def build_registry(panel: CurvePanel, breaks: Sequence[int]) -> SegmentRegistry:
    """Estimate one lag-0 covariance operator per segment.

    `breaks` lists 1-based indices of the last curve of each segment, in
    increasing order; an empty list yields a single whole-panel segment.
    """
    n = len(panel)
    boundaries = [0, *sorted(int(b) for b in breaks), n]
    for a, b in zip(boundaries, boundaries[1:]):
        if not 0 <= a < b <= n:
            raise ValueError(f"break list does not partition 1..{n}")
    ops = []
    for a, b in zip(boundaries, boundaries[1:]):
        segment = CurvePanel(panel.grid, panel.values[a:b])
        ops.append(estimate_lagged_cov(segment, 0)[0])
    return SegmentRegistry(panel.grid, tuple(boundaries), tuple(ops))


def _nearest_operator(registry: SegmentRegistry, query: KernelOperator) -> KernelOperator:
    distances = [hs_norm(op - query) for op in registry.operators]
    return registry.operators[int(np.argmin(distances))]


def classify_with_segments(
    reg0: SegmentRegistry, reg1: SegmentRegistry, y: Curve, d: int | None = None, ratio: float = 0.9
) -> tuple[int, float, float]:
    """Nearest-segment classification of a single curve.

    Per group, the segment operator closest (HS) to the rank-one query
    operator is selected; the squared difference of the two selected operators
    supplies d feature functions; the query is assigned to the group whose
    scores are nearer. Ties (including identical selected operators) go to
    group 1. `d` defaults to the cumulative-share rule at `ratio`.
    """
    if reg0.grid != reg1.grid or y.grid != reg0.grid:
        raise IncompatibleGridsError("registries and query must share a grid")
    query = rank_one(y)
    c0 = _nearest_operator(reg0, query)
    c1 = _nearest_operator(reg1, query)
    diff = c0 - c1
    basis = _basis_from_difference(diff, 0, None)
    if basis.spectrum_total <= 0.0:
        warnings.warn("selected segment operators are identical; defaulting to group 1")
        return 1, 0.0, 0.0
    if d is None:
        d_sel = _select_dim_quiet(basis, ratio)
    else:
        available = int(np.count_nonzero(basis.eigenvalues > 1e-12 * basis.eigenvalues[0]))
        if not 1 <= d <= available:
            raise ValueError(f"d={d} exceeds the available rank {available}")
        d_sel = d
    s0 = score_matrix(c0, basis, d_sel)
    s1 = score_matrix(c1, basis, d_sel)
    proj = basis.vectors[:d_sel] @ (y.grid.weights * y.values)
    sy = np.outer(proj, proj)
    d0 = float(((s0 - sy) ** 2).sum())
    d1 = float(((s1 - sy) ** 2).sum())
    label = 0 if d0 - d1 < 0.0 else 1
    return label, d0, d1


def _select_dim_quiet(basis: DiscriminativeBasis, ratio: float) -> int:
    try:
        return select_dim(basis, ratio)
    except NoDiscrepancyError:
        return 1
