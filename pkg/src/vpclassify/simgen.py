"""Seeded generators for the shipped simulation designs.

Three designs: a functional moving-average process of order 3 driven by
random 21x21 template operators, an independent-curve model with diagonal
score variances over 24 cubic B-splines, and two Fourier-score settings whose
groups differ in a handful of score variances.

All randomness flows through PCG64 seeded from explicit integer tuples, with
normal variates produced by the inverse CDF applied to 53-bit uniforms. That
keeps the streams portable and the documented transform reproducible; tests
compare statistics, never raw draws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .funcgrid import BasisSet, CurvePanel, Grid, bspline_basis, fourier_basis

__all__ = [
    "FmaSpec",
    "make_fma_spec",
    "simulate_fma",
    "simulate_bspline_scores",
    "simulate_fourier_settings",
    "fma_sigma_vectors",
    "standard_normals",
]

FOURIER_SIZE = 21
BSPLINE_SIZE = 24
MA_ORDER = 3


def _rng(*seed_parts: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed_parts))


def standard_normals(rng: np.random.Generator, shape) -> np.ndarray:
    """Inverse-CDF normal variates from 53-bit uniforms, bounded away from 0 and 1."""
    u = (rng.integers(0, 1 << 53, size=shape).astype(float) + 0.5) / float(1 << 53)
    return ndtri(u)


def fma_sigma_vectors() -> tuple[np.ndarray, np.ndarray]:
    """Per-group template standard-deviation vectors over the 21 Fourier coordinates."""
    s0 = np.concatenate([[1.0], np.tile([0.8, 0.8, 1.0, 1.0], 5)])
    s1 = np.concatenate([[1.0], np.tile([1.0, 1.0, 0.8, 0.8], 5)])
    return s0, s1


@dataclass(frozen=True)
class FmaSpec:
    """Moving-average templates for both groups, drawn once per experiment run."""

    ma_coefficients: tuple[float, ...]  # one per lag 1..order
    templates: tuple[np.ndarray, np.ndarray]  # (21, 21) per group
    seed: int


def make_fma_spec(seed: int, ma_coefficient: float = 0.4) -> FmaSpec:
    """Draw the per-group 21x21 template matrices; entry (i, j) has std sigma_g[i] * sigma_g[j]."""
    rng = _rng(seed, 0)
    templates = []
    for sigma in fma_sigma_vectors():
        scale = np.outer(sigma, sigma)
        templates.append(np.sqrt(scale) * standard_normals(rng, scale.shape))
    coeffs = (ma_coefficient,) * MA_ORDER
    return FmaSpec(coeffs, (templates[0], templates[1]), seed)


def simulate_fma(spec: FmaSpec, n: int, grid: Grid, group: int = 0, seed: int | None = None) -> CurvePanel:
    """Simulate n consecutive curves of the group's moving-average process.

    Innovation curves have i.i.d. standard normal Fourier scores; a burn-in of
    `order` innovations makes the first curve fully distributed. `seed`
    defaults to a stream derived from the spec seed and the group, so separate
    calls for train and test data should pass distinct seeds.
    """
    if n < 1:
        raise ValueError("need at least one curve")
    if group not in (0, 1):
        raise ValueError("group must be 0 or 1")
    rng = _rng(spec.seed, 1 + group) if seed is None else _rng(seed)
    K = spec.templates[group]
    innov = standard_normals(rng, (n + MA_ORDER, FOURIER_SIZE))
    scores = innov[MA_ORDER:].copy()
    for ell, a in enumerate(spec.ma_coefficients, start=1):
        scores += a * innov[MA_ORDER - ell : MA_ORDER - ell + n] @ K.T
    basis = fourier_basis(grid, FOURIER_SIZE)
    return CurvePanel(grid, scores @ basis.evaluations, group)


def _score_panels(
    stds: tuple[np.ndarray, np.ndarray], basis: BasisSet, n: int, seed: int
) -> tuple[CurvePanel, CurvePanel]:
    panels = []
    for group, std in enumerate(stds):
        rng = _rng(seed, 10 + group)
        scores = standard_normals(rng, (n, std.size)) * std
        panels.append(CurvePanel(basis.grid, scores @ basis.evaluations, group))
    return panels[0], panels[1]


def simulate_bspline_scores(
    a2: float, n: int, grid: Grid, seed: int
) -> tuple[CurvePanel, CurvePanel]:
    """Independent curves over 24 cubic B-splines with one boosted score per block of 8.

    The boosted standard deviation is a = sqrt(a2) and the baseline b solves
    a^2 + 7 b^2 = 100; group 0 boosts position 3 of each block, group 1
    position 6 (1-based).
    """
    if not 0.0 < a2 < 100.0:
        raise ValueError("a2 must lie strictly between 0 and 100")
    a = float(np.sqrt(a2))
    b = float(np.sqrt((100.0 - a2) / 7.0))
    block0 = np.array([b, b, a, b, b, b, b, b])
    block1 = np.array([b, b, b, b, b, a, b, b])
    basis = bspline_basis(grid, BSPLINE_SIZE, degree=3)
    return _score_panels((np.tile(block0, 3), np.tile(block1, 3)), basis, n, seed)


def fourier_setting_variances(setting: int) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal score variances for the two Fourier-score settings."""
    d0 = np.ones(FOURIER_SIZE)
    d1 = np.ones(FOURIER_SIZE)
    if setting == 1:
        d0[3:5] = 0.0  # coordinates 4, 5 off in group 0
        d1[1:3] = 0.0  # coordinates 2, 3 off in group 1
    elif setting == 2:
        d0[[2, 4, 6]] = 0.0  # coordinates 3, 5, 7 off in group 0
        d1[[1, 3, 5]] = 0.0  # coordinates 2, 4, 6 off in group 1
    else:
        raise ValueError("setting must be 1 or 2")
    return d0, d1


def simulate_fourier_settings(
    setting: int, n: int, grid: Grid, seed: int
) -> tuple[CurvePanel, CurvePanel]:
    """Independent curves with 21 Fourier scores and setting-specific diagonal variances."""
    d0, d1 = fourier_setting_variances(setting)
    basis = fourier_basis(grid, FOURIER_SIZE)
    return _score_panels((np.sqrt(d0), np.sqrt(d1)), basis, n, seed)
