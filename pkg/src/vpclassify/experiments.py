"""Repetition-averaged evaluation drivers for the shipped simulation designs.

Every driver runs seeded, independent repetitions (optionally across worker
processes; results do not depend on the worker count), classifies fresh test
data against a freshly trained model, and reports per-group average
classification rates with their spread across repetitions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed

from .classifier import classify, single_lag_rate, train
from .funcgrid import CurvePanel, concat_channels, fourier_basis, make_uniform_grid
from .operators import symmetrized_lagged_cov
from .classifier import discriminative_basis, score_matrix
from .simgen import make_fma_spec, simulate_bspline_scores, simulate_fma, simulate_fourier_settings, standard_normals

__all__ = [
    "RateSummary",
    "ExperimentConfig",
    "subseed",
    "fma_cell",
    "fma_table",
    "score_model_cell",
    "score_model_table",
    "dimension_sweep",
    "simulate_piecewise_channels",
    "run_experiment",
]


def subseed(root: int, *parts: int) -> int:
    """Deterministic 64-bit child seed for a labeled sub-stream."""
    return int(np.random.SeedSequence((root, *parts)).generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class RateSummary:
    """Per-repetition classification rates for both groups."""

    rates0: tuple[float, ...]
    rates1: tuple[float, ...]

    @property
    def mean(self) -> tuple[float, float]:
        return float(np.mean(self.rates0)), float(np.mean(self.rates1))

    @property
    def spread(self) -> tuple[float, float]:
        """Standard deviation of the empirical rates across repetitions."""
        if len(self.rates0) < 2:
            return float("nan"), float("nan")
        return float(np.std(self.rates0, ddof=1)), float(np.std(self.rates1, ddof=1))

    @property
    def stderr(self) -> tuple[float, float]:
        """Standard error of the mean rates."""
        s0, s1 = self.spread
        n = len(self.rates0)
        return s0 / np.sqrt(n), s1 / np.sqrt(n)

    @property
    def pooled_mean(self) -> float:
        return float(np.mean(self.rates0 + self.rates1))


def _run_reps(rep_fn, repetitions: int, workers: int) -> list:
    if workers > 1:
        return Parallel(n_jobs=workers)(delayed(rep_fn)(rep) for rep in range(repetitions))
    return [rep_fn(rep) for rep in range(repetitions)]


# ---------------------------------------------------------------------------
# moving-average design


def _fma_rep(
    rep: int,
    n_train: int,
    p: int,
    seed: int,
    grid_size: int,
    n_test_blocks: int,
    alpha: float,
    ratio: float,
    cv_reps: int,
) -> tuple[float, float]:
    grid = make_uniform_grid(grid_size)
    spec = make_fma_spec(subseed(seed, rep, 0))
    panel0 = simulate_fma(spec, n_train, grid, 0, seed=subseed(seed, rep, 1))
    panel1 = simulate_fma(spec, n_train, grid, 1, seed=subseed(seed, rep, 2))
    rates = [
        single_lag_rate(panel0, panel1, h, reps=cv_reps, ratio=ratio, rng_seed=subseed(seed, rep, 3 + h))
        for h in range(p + 1)
    ]
    model = train(panel0, panel1, p, alpha, rates, ratio=ratio)
    out = []
    for group in (0, 1):
        hits = 0
        for b in range(n_test_blocks):
            block = simulate_fma(spec, p + 1, grid, group, seed=subseed(seed, rep, 100 + group, b))
            label, _, _ = classify(model, block.curves)
            hits += label == group
        out.append(hits / n_test_blocks)
    return out[0], out[1]


def fma_cell(
    n_train: int,
    p: int,
    repetitions: int,
    seed: int,
    grid_size: int = 101,
    n_test_blocks: int = 100,
    alpha: float = 10.0,
    ratio: float = 0.9,
    cv_reps: int = 30,
    workers: int = 1,
) -> RateSummary:
    """Average classification rates for the moving-average design at one (n, p)."""
    results = _run_reps(
        lambda rep: _fma_rep(rep, n_train, p, seed, grid_size, n_test_blocks, alpha, ratio, cv_reps),
        repetitions,
        workers,
    )
    return RateSummary(tuple(r[0] for r in results), tuple(r[1] for r in results))


def fma_table(
    n_values: Sequence[int],
    p_values: Sequence[int],
    repetitions: int,
    seed: int,
    **kwargs,
) -> dict[tuple[int, int], RateSummary]:
    """fma_cell over the full (n, p) grid; cells get independent sub-seeds."""
    return {
        (n, p): fma_cell(n, p, repetitions, subseed(seed, n, p), **kwargs)
        for n in n_values
        for p in p_values
    }


# ---------------------------------------------------------------------------
# independent-curve score designs (single-curve queries, lag 0)


def _classify_panel(model, panel: CurvePanel, group: int) -> float:
    hits = sum(classify(model, [c])[0] == group for c in panel.curves)
    return hits / len(panel)


def _score_model_rep(
    rep: int, a2: float, seed: int, n_train: int, n_test: int, grid_size: int, ratio: float
) -> tuple[float, float]:
    grid = make_uniform_grid(grid_size)
    train0, train1 = simulate_bspline_scores(a2, n_train, grid, subseed(seed, rep, 0))
    test0, test1 = simulate_bspline_scores(a2, n_test, grid, subseed(seed, rep, 1))
    model = train(train0, train1, 0, 0.0, [0.5], ratio=ratio)
    return _classify_panel(model, test0, 0), _classify_panel(model, test1, 1)


def score_model_cell(
    a2: float,
    repetitions: int,
    seed: int,
    n_train: int = 100,
    n_test: int = 100,
    grid_size: int = 101,
    ratio: float = 0.9,
    workers: int = 1,
) -> RateSummary:
    """Average rates for the B-spline score design at one discrepancy level a2."""
    results = _run_reps(
        lambda rep: _score_model_rep(rep, a2, seed, n_train, n_test, grid_size, ratio),
        repetitions,
        workers,
    )
    return RateSummary(tuple(r[0] for r in results), tuple(r[1] for r in results))


def score_model_table(
    a2_values: Sequence[float], repetitions: int, seed: int, **kwargs
) -> dict[float, RateSummary]:
    return {
        a2: score_model_cell(a2, repetitions, subseed(seed, int(round(a2 * 100))), **kwargs)
        for a2 in a2_values
    }


# ---------------------------------------------------------------------------
# dimension sweep for the Fourier-score settings


def _sweep_rep(
    rep: int,
    setting: int,
    d_values: tuple[int | None, ...],
    seed: int,
    n_train: int,
    n_test: int,
    grid_size: int,
) -> list[tuple[float, float]]:
    grid = make_uniform_grid(grid_size)
    train0, train1 = simulate_fourier_settings(setting, n_train, grid, subseed(seed, rep, 0))
    test0, test1 = simulate_fourier_settings(setting, n_test, grid, subseed(seed, rep, 1))
    d_full = min(grid.size, n_train - 1)
    dims = [d_full if d is None else min(d, d_full) for d in d_values]
    d_max = max(dims)

    basis = discriminative_basis(train0, train1, 0)
    s0 = score_matrix(symmetrized_lagged_cov(train0, 0), basis, d_max)
    s1 = score_matrix(symmetrized_lagged_cov(train1, 0), basis, d_max)
    weighted = basis.vectors[:d_max] * grid.weights
    out = []
    for d in dims:
        f0 = float((s0[:d, :d] ** 2).sum())
        f1 = float((s1[:d, :d] ** 2).sum())
        rates = []
        for group, panel in ((0, test0), (1, test1)):
            proj = panel.values @ weighted[:d].T  # (n_test, d)
            q0 = np.einsum("ki,ij,kj->k", proj, s0[:d, :d], proj)
            q1 = np.einsum("ki,ij,kj->k", proj, s1[:d, :d], proj)
            r = (proj**2).sum(axis=1) ** 2
            d0 = f0 - 4.0 * q0 + 4.0 * r
            d1 = f1 - 4.0 * q1 + 4.0 * r
            labels = np.where(d0 - d1 < 0.0, 0, 1)
            rates.append(float(np.mean(labels == group)))
        out.append((rates[0], rates[1]))
    return out


def dimension_sweep(
    setting: int,
    d_values: Sequence[int | None],
    repetitions: int,
    seed: int,
    n_train: int = 200,
    n_test: int = 100,
    grid_size: int = 101,
    workers: int = 1,
) -> dict[int | None, RateSummary]:
    """Rates of the lag-0 classifier across fixed dimensions; None means no reduction.

    All dimensions share each repetition's data and basis, so the comparison
    across d is paired. The per-curve distances equal the ones `classify`
    computes at p = 0 for the same fixed dimension.
    """
    d_values = tuple(d_values)
    results = _run_reps(
        lambda rep: _sweep_rep(rep, setting, d_values, seed, n_train, n_test, grid_size),
        repetitions,
        workers,
    )
    return {
        d: RateSummary(tuple(r[i][0] for r in results), tuple(r[i][1] for r in results))
        for i, d in enumerate(d_values)
    }


# ---------------------------------------------------------------------------
# synthetic multi-channel piecewise-stationary design


def simulate_piecewise_channels(
    group: int,
    n_epochs: int,
    break_after: int,
    seed: int,
    channels: int = 8,
    n_coords: int = 10,
    grid_size: int = 64,
    scale_jump: float = 1.8,
) -> list[CurvePanel]:
    """Channels of zero-mean epochs whose score covariance changes after `break_after`.

    Group 0 concentrates variance on low Fourier coordinates, group 1 on high
    ones; after the break both profiles are inflated by `scale_jump`. Returns
    one panel per channel, all sharing the break.
    """
    if not 0 < break_after < n_epochs:
        raise ValueError("break must fall strictly inside the epoch range")
    grid = make_uniform_grid(grid_size)
    basis = fourier_basis(grid, n_coords)
    half = n_coords // 2
    profile = np.full(n_coords, 0.25)
    if group == 0:
        profile[:half] = 1.0
    else:
        profile[half:] = 1.0
    stds = np.tile(profile, (n_epochs, 1))
    stds[break_after:] *= scale_jump
    panels = []
    for ch in range(channels):
        rng = np.random.default_rng(np.random.SeedSequence((seed, group, ch)))
        scores = standard_normals(rng, (n_epochs, n_coords)) * stds
        panels.append(CurvePanel(grid, scores @ basis.evaluations, group))
    return panels


def concat_epochs(panels: list[CurvePanel]) -> CurvePanel:
    """Concatenate the channels of every epoch into one panel of long curves."""
    curves = [concat_channels(panels, k) for k in range(len(panels[0]))]
    return CurvePanel.from_curves(curves, panels[0].group_label)


# ---------------------------------------------------------------------------
# config-driven entry point used by the command line


@dataclass
class ExperimentConfig:
    """Settings for one evaluation run."""

    design: str  # fma | bspline | fourier1 | fourier2
    repetitions: int = 200
    seed: int = 0
    n_train: tuple[int, ...] = (100,)
    p_values: tuple[int, ...] = (0, 1, 2, 3, 4)
    a2_values: tuple[float, ...] = (20.0, 40.0, 60.0, 80.0)
    d_values: tuple[int | None, ...] = (1, 2, 3, 4, 5, 6, 7, 8, 9, None)
    n_test: int = 100
    alpha: float = 10.0
    ratio: float = 0.9
    cv_reps: int = 30
    grid_size: int = 101
    workers: int = 1

    def __post_init__(self):
        if self.design not in ("fma", "bspline", "fourier1", "fourier2"):
            raise ValueError(f"unknown design {self.design!r}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")


def run_experiment(config: ExperimentConfig) -> list[dict]:
    """Execute the configured design; returns one row dict per table cell."""
    rows = []
    if config.design == "fma":
        table = fma_table(
            config.n_train,
            config.p_values,
            config.repetitions,
            config.seed,
            grid_size=config.grid_size,
            n_test_blocks=config.n_test,
            alpha=config.alpha,
            ratio=config.ratio,
            cv_reps=config.cv_reps,
            workers=config.workers,
        )
        for (n, p), summary in table.items():
            rows.append(_row({"n": n, "p": p}, summary))
    elif config.design == "bspline":
        table = score_model_table(
            config.a2_values,
            config.repetitions,
            config.seed,
            n_train=config.n_train[0],
            n_test=config.n_test,
            grid_size=config.grid_size,
            ratio=config.ratio,
            workers=config.workers,
        )
        for a2, summary in table.items():
            rows.append(_row({"a2": a2}, summary))
    else:
        setting = 1 if config.design == "fourier1" else 2
        sweep = dimension_sweep(
            setting,
            config.d_values,
            config.repetitions,
            config.seed,
            n_train=config.n_train[0],
            n_test=config.n_test,
            grid_size=config.grid_size,
            workers=config.workers,
        )
        for d, summary in sweep.items():
            rows.append(_row({"d": "full" if d is None else d}, summary))
    return rows


def _row(keys: dict, summary: RateSummary) -> dict:
    (m0, m1), (s0, s1) = summary.mean, summary.spread
    return {
        **keys,
        "acr_group0": m0,
        "acr_group1": m1,
        "se_group0": s0,
        "se_group1": s1,
        "repetitions": len(summary.rates0),
    }
