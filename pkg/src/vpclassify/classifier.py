"""Variation pattern classifier.

Groups that share a mean are told apart by their lagged (auto-)covariance
operators. For each lag h the symmetrized covariance difference between the
two training groups is eigendecomposed; the squared spectrum ranks a small
set of discriminative feature functions. Query blocks are scored against each
group's covariance in that basis, lag contributions are combined with
amplitude-normalized, CV-boosted weights, and the nearer group wins.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateLagError,
    IncompatibleGridsError,
    NoDiscrepancyError,
    UntrainableModelError,
)
from .funcgrid import Curve, CurvePanel, Grid, l2_norm, panel_norms, scale_to_unit
from .operators import (
    KernelOperator,
    _tie_stable_order,
    eigendecompose,
    hs_norm,
    pooled_lagged_cov,
)

__all__ = [
    "DiscriminativeBasis",
    "LagComponent",
    "VpcModel",
    "CvReport",
    "MulticlassVpcModel",
    "DroppedLagWarning",
    "discriminative_basis",
    "select_dim",
    "score_matrix",
    "lag_weight",
    "single_lag_rate",
    "tune",
    "train",
    "classify",
    "classify_pipeline",
    "train_multiclass",
    "classify_multiclass",
    "amplitude_prefilter",
    "tune_tau",
]

#: Relative floor under which a lag's squared-difference spectrum counts as zero.
SPECTRUM_FLOOR = 1e-12


class DroppedLagWarning(UserWarning):
    """A lag was excluded from the weighted sum (no discrepancy or no amplitude)."""


@dataclass(frozen=True)
class DiscriminativeBasis:
    """Feature functions for one lag, ranked by squared covariance-difference spectrum."""

    lag: int
    grid: Grid
    eigenvalues: np.ndarray  # descending, nonnegative (squares of the difference spectrum)
    vectors: np.ndarray  # (m, T) rows, L2-orthonormal
    d: int
    spectrum_total: float  # sum over the full spectrum, even if rows were truncated

    @property
    def functions(self) -> list[Curve]:
        return [Curve(self.grid, row) for row in self.vectors]

    def with_dim(self, d: int) -> "DiscriminativeBasis":
        if not 1 <= d <= self.vectors.shape[0]:
            raise ValueError(f"dimension {d} outside 1..{self.vectors.shape[0]}")
        return replace(self, d=d)


@dataclass(frozen=True)
class LagComponent:
    """Everything the decision rule needs for one lag."""

    lag: int
    basis: DiscriminativeBasis
    scores0: np.ndarray  # (d, d)
    scores1: np.ndarray  # (d, d)
    weight: float
    single_lag_rate: float


@dataclass(frozen=True)
class VpcModel:
    """Trained two-group classifier state."""

    grid: Grid
    max_lag: int
    components: tuple[LagComponent, ...]
    alpha: float
    ratio: float
    tau: float | None = None
    high_group: int | None = None
    scaled: bool = False
    group_labels: tuple[int, int] = (0, 1)

    @property
    def block_length(self) -> int:
        return self.max_lag + 1


@dataclass(frozen=True)
class CvReport:
    """Monte-Carlo cross-validation summary for the (max lag, alpha) grid."""

    p_candidates: tuple[int, ...]
    alpha_candidates: tuple[float, ...]
    mean_rates: dict[tuple[int, float], float]
    single_lag_rates: tuple[float, ...]  # P(h) for h = 0..max(p_candidates)
    repetitions: int
    chosen: tuple[int, float]


def discriminative_basis(
    panel0: CurvePanel, panel1: CurvePanel, h: int, max_rank: int | None = None
) -> DiscriminativeBasis:
    """Eigenpairs of the squared symmetrized covariance difference at lag h.

    The difference operator A = kappa0 - kappa1 is decomposed directly and its
    eigenvalues squared, which gives the spectrum of A composed with itself
    without ever forming the square.
    """
    if panel0.grid != panel1.grid:
        raise IncompatibleGridsError("panels do not share a grid")
    k0 = _kappa([panel0], h)
    k1 = _kappa([panel1], h)
    return _basis_from_difference(k0.op - k1.op, h, max_rank)


def _basis_from_difference(
    diff: KernelOperator, h: int, max_rank: int | None
) -> DiscriminativeBasis:
    eig = eigendecompose(diff)
    squared = eig.eigenvalues**2
    order = _tie_stable_order(squared, eig.vectors)
    squared = squared[order]
    vectors = eig.vectors[order]
    total = float(squared.sum())
    if max_rank is not None:
        squared, vectors = squared[:max_rank], vectors[:max_rank]
    return DiscriminativeBasis(h, diff.grid, squared, vectors, vectors.shape[0], total)


def select_dim(basis: DiscriminativeBasis, ratio: float) -> int:
    """Smallest dimension whose cumulative eigenvalue share reaches `ratio`."""
    if not 0.0 < ratio <= 1.0:
        raise ValueError("ratio must lie in (0, 1]")
    total = basis.spectrum_total
    if total <= 0.0:
        raise NoDiscrepancyError(f"lag {basis.lag} carries no covariance discrepancy")
    cum = np.cumsum(basis.eigenvalues)
    hit = np.flatnonzero(cum >= ratio * total * (1.0 - 1e-9))
    return int(hit[0]) + 1 if hit.size else int(basis.eigenvalues.size)


def score_matrix(kappa: KernelOperator, basis: DiscriminativeBasis, d: int | None = None) -> np.ndarray:
    """Score entries S[i, j] = <kappa(nu_i), nu_j> over the first d feature functions."""
    if kappa.grid != basis.grid:
        raise IncompatibleGridsError("operator grid does not match basis grid")
    d = basis.d if d is None else d
    P = basis.vectors[:d] * basis.grid.weights  # rows w_t nu_i(t)
    return (P @ kappa.kernel.T) @ P.T


def lag_weight(
    panel0: CurvePanel, panel1: CurvePanel, h: int, alpha: float, single_lag_rate: float
) -> float:
    """Inverse-amplitude weight exp(alpha * P(h)) / (|C0_h| + |C1_h|)."""
    n0 = hs_norm(pooled_lagged_cov([panel0], h)[0])
    n1 = hs_norm(pooled_lagged_cov([panel1], h)[0])
    return _weight_from_norms(n0 + n1, alpha, single_lag_rate, h)


def _weight_from_norms(norm_sum: float, alpha: float, rate: float, h: int) -> float:
    if norm_sum <= 0.0:
        raise DegenerateLagError(f"lag {h} has zero covariance amplitude in both groups")
    return float(np.exp(alpha * rate) / norm_sum)


# ---------------------------------------------------------------------------
# fitting machinery shared by train() and the cross-validation loops


@dataclass(frozen=True)
class _Kappa:
    """Symmetrized lag-h covariance with the forward-estimate amplitude."""

    op: KernelOperator
    forward_norm: float


def _kappa(fragments: Sequence[CurvePanel], h: int) -> _Kappa:
    fw, bw = pooled_lagged_cov(fragments, h)
    return _Kappa(fw + bw, hs_norm(fw))


def _fit_lag(
    k0: _Kappa,
    k1: _Kappa,
    h: int,
    ratio: float,
    d_cap: int,
    d_fixed: int | None,
) -> tuple[DiscriminativeBasis, np.ndarray, np.ndarray, float] | None:
    """Basis, both score matrices, and amplitude for one lag; None when the lag is dropped."""
    norm_sum = k0.forward_norm + k1.forward_norm
    if norm_sum <= 0.0:
        warnings.warn(f"lag {h} dropped: zero covariance amplitude", DroppedLagWarning)
        return None
    basis = _basis_from_difference(k0.op - k1.op, h, None)
    if basis.spectrum_total < SPECTRUM_FLOOR * norm_sum**2:
        warnings.warn(f"lag {h} dropped: no covariance discrepancy", DroppedLagWarning)
        return None
    d = d_fixed if d_fixed is not None else select_dim(basis, ratio)
    d = max(1, min(d, d_cap, basis.eigenvalues.size))
    basis = replace(basis, eigenvalues=basis.eigenvalues[:d], vectors=basis.vectors[:d], d=d)
    s0 = score_matrix(k0.op, basis)
    s1 = score_matrix(k1.op, basis)
    return basis, s0, s1, norm_sum


def _fit_components(
    frags0: Sequence[CurvePanel],
    frags1: Sequence[CurvePanel],
    lags: Sequence[int],
    ratio: float,
    d_fixed: int | None,
) -> list[tuple[int, DiscriminativeBasis, np.ndarray, np.ndarray, float]]:
    n0 = sum(len(f) for f in frags0)
    n1 = sum(len(f) for f in frags1)
    T = frags0[0].grid.size
    fitted = []
    for h in lags:
        cap = min(T, n0 - h - 1, n1 - h - 1)
        out = _fit_lag(_kappa(frags0, h), _kappa(frags1, h), h, ratio, max(1, cap), d_fixed)
        if out is not None:
            fitted.append((h, *out))
    return fitted


def _block_scores(ys_values: np.ndarray, grid: Grid, basis: DiscriminativeBasis) -> np.ndarray:
    """Score matrix of the query-block operator at the basis lag.

    Contracting the block's symmetrized lag-h outer-product average against
    the feature functions reduces to lagged products of the blocks' basis
    projections, so the T x T query kernel is never formed. Agrees with
    `score_matrix` applied to `empirical_y_operator` up to roundoff.
    """
    h = basis.lag
    if ys_values.shape[0] < h + 1:
        raise ValueError(f"a lag-{h} query needs at least {h + 1} curves")
    proj = ys_values @ (basis.vectors[: basis.d] * grid.weights).T  # (m+h, d)
    m = ys_values.shape[0] - h
    cross = proj[h:].T @ proj[:m] / m
    return cross + cross.T


def _squared_gap(scores_g: np.ndarray, scores_y: np.ndarray) -> float:
    return float(((scores_g - scores_y) ** 2).sum())


def train(
    panel0: CurvePanel,
    panel1: CurvePanel,
    p: int,
    alpha: float,
    rates: Sequence[float],
    ratio: float = 0.9,
    d_fixed: int | None = None,
    tau: float | None = None,
    high_group: int | None = None,
    scaled: bool = False,
    group_labels: tuple[int, int] = (0, 1),
) -> VpcModel:
    """Fit the classifier over lags 0..p.

    `rates` supplies the per-lag single-lag classification rates P(h) entering
    the weights (see `single_lag_rate`); it must cover h = 0..p. Lags with no
    covariance discrepancy or no amplitude are dropped with a warning; when
    none survive the model is untrainable.
    """
    if panel0.grid != panel1.grid:
        raise IncompatibleGridsError("panels do not share a grid")
    if p < 0:
        raise ValueError("max lag must be nonnegative")
    if len(rates) < p + 1:
        raise ValueError(f"need rates for every lag 0..{p}")
    if min(len(panel0), len(panel1)) <= p:
        raise ValueError(f"both panels need more than {p} curves")
    fitted = _fit_components([panel0], [panel1], range(p + 1), ratio, d_fixed)
    components = tuple(
        LagComponent(h, basis, s0, s1, _weight_from_norms(norm_sum, alpha, rates[h], h), rates[h])
        for h, basis, s0, s1, norm_sum in fitted
    )
    if not components:
        raise UntrainableModelError("every lag was degenerate; nothing to train on")
    return VpcModel(
        panel0.grid, p, components, alpha, ratio, tau, high_group, scaled, group_labels
    )


def classify(model: VpcModel, ys: Sequence[Curve]) -> tuple[int, float, float]:
    """Assign a block of consecutive query curves to the nearer group.

    Returns (label, D0, D1) where D_g is the weighted squared score distance
    to group g. Ties go to the second group.
    """
    if len(ys) != model.block_length:
        raise ValueError(f"expected a block of {model.block_length} curves, got {len(ys)}")
    for y in ys:
        if y.grid != model.grid:
            raise IncompatibleGridsError("query curves do not match the model grid")
    values = np.stack([y.values for y in ys])
    d0 = d1 = 0.0
    for comp in model.components:
        sy = _block_scores(values, model.grid, comp.basis)
        d0 += comp.weight * _squared_gap(comp.scores0, sy)
        d1 += comp.weight * _squared_gap(comp.scores1, sy)
    label = model.group_labels[0] if d0 - d1 < 0.0 else model.group_labels[1]
    return label, d0, d1


# ---------------------------------------------------------------------------
# Monte-Carlo cross-validation


def _rep_rng(seed: int, rep: int, group: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, rep, group)))


def _split_block(panel: CurvePanel, start: int, block: int) -> tuple[list[CurvePanel], np.ndarray]:
    """Remove a consecutive block; the two leftover fragments stay separate sequences."""
    fragments = []
    if start > 0:
        fragments.append(CurvePanel(panel.grid, panel.values[:start]))
    if start + block < len(panel):
        fragments.append(CurvePanel(panel.grid, panel.values[start + block :]))
    return fragments, panel.values[start : start + block]


def _holdout_gaps(
    panel0: CurvePanel,
    panel1: CurvePanel,
    rep: int,
    seed: int,
    block: int,
    lags: Sequence[int],
    ratio: float,
) -> tuple[int, dict[int, tuple[float, float, float]]] | None:
    """One CV repetition: hold a block out of the alternating group, refit, score it.

    Returns the held-out group and, per surviving lag, (gap to group 0,
    gap to group 1, covariance amplitude).
    """
    group = rep % 2
    heldout = (panel0, panel1)[group]
    rng = _rep_rng(seed, rep, group)
    start = int(rng.integers(0, len(heldout) - block + 1))
    fragments, block_values = _split_block(heldout, start, block)
    frags0, frags1 = (fragments, [panel1]) if group == 0 else ([panel0], fragments)
    fitted = _fit_components(frags0, frags1, lags, ratio, None)
    if not fitted:
        return None
    gaps = {}
    for h, basis, s0, s1, norm_sum in fitted:
        sy = _block_scores(block_values, heldout.grid, basis)
        gaps[h] = (_squared_gap(s0, sy), _squared_gap(s1, sy), norm_sum)
    return group, gaps


def single_lag_rate(
    panel0: CurvePanel,
    panel1: CurvePanel,
    h: int,
    reps: int = 50,
    block: int | None = None,
    ratio: float = 0.9,
    rng_seed: int = 0,
) -> float:
    """Monte-Carlo estimate of the classification rate using lag h alone.

    Each repetition removes a consecutive block from one group (groups
    alternate), refits a lag-h-only classifier on the leftover fragments plus
    the intact other group, and classifies the block. The returned rate is
    the mean correctness over repetitions.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    block = h + 1 if block is None else block
    if block < h + 1:
        raise ValueError(f"a lag-{h} block needs at least {h + 1} curves")
    if min(len(panel0), len(panel1)) <= h + block:
        raise ValueError(f"panels must be longer than lag {h} plus block {block}")
    hits = []
    for rep in range(reps):
        out = _holdout_gaps(panel0, panel1, rep, rng_seed, block, [h], ratio)
        if out is None:
            continue
        group, gaps = out
        g0, g1, _ = gaps[h]
        label = 0 if g0 - g1 < 0.0 else 1
        hits.append(float(label == group))
    if not hits:
        raise UntrainableModelError(f"lag {h} was degenerate in every repetition")
    return float(np.mean(hits))


def tune(
    panel0: CurvePanel,
    panel1: CurvePanel,
    p_candidates: Sequence[int],
    alpha_candidates: Sequence[float],
    reps: int = 50,
    ratio: float = 0.9,
    rng_seed: int = 0,
    rate_reps: int | None = None,
) -> CvReport:
    """Monte-Carlo cross-validation over the (max lag, alpha) grid.

    P(h) is estimated once per lag; every (p, alpha) pair is then scored with
    the full weighted classifier under the same block-resampling contract.
    One repetition's held-out block is shared across the alpha grid, which is
    exactly what the per-repetition seed derivation implies. The winner
    maximizes the mean rate; ties break toward smaller p, then smaller alpha.
    """
    if not p_candidates or not alpha_candidates:
        raise ValueError("candidate grids must be nonempty")
    if reps < 1:
        raise ValueError("reps must be at least 1")
    p_candidates = tuple(sorted(set(int(p) for p in p_candidates)))
    alpha_candidates = tuple(sorted(set(float(a) for a in alpha_candidates)))
    p_max = p_candidates[-1]
    rates = tuple(
        single_lag_rate(
            panel0, panel1, h, reps=rate_reps or reps, ratio=ratio, rng_seed=rng_seed + 1 + h
        )
        for h in range(p_max + 1)
    )
    mean_rates: dict[tuple[int, float], float] = {}
    for p in p_candidates:
        hits = {alpha: [] for alpha in alpha_candidates}
        for rep in range(reps):
            out = _holdout_gaps(panel0, panel1, rep, rng_seed, p + 1, range(p + 1), ratio)
            if out is None:
                continue
            group, gaps = out
            for alpha in alpha_candidates:
                d0 = d1 = 0.0
                for h, (g0, g1, norm_sum) in gaps.items():
                    w = _weight_from_norms(norm_sum, alpha, rates[h], h)
                    d0 += w * g0
                    d1 += w * g1
                label = 0 if d0 - d1 < 0.0 else 1
                hits[alpha].append(float(label == group))
        for alpha in alpha_candidates:
            mean_rates[(p, alpha)] = float(np.mean(hits[alpha])) if hits[alpha] else 0.0
    chosen = max(mean_rates, key=lambda key: (mean_rates[key], -key[0], -key[1]))
    return CvReport(p_candidates, alpha_candidates, mean_rates, rates, reps, chosen)


# ---------------------------------------------------------------------------
# multiple groups


@dataclass(frozen=True)
class MulticlassVpcModel:
    """Pairwise two-group models walked in a fixed tournament order."""

    group_labels: tuple[int, ...]
    pair_models: dict[tuple[int, int], VpcModel]
    max_lag: int


def train_multiclass(
    panels: Sequence[CurvePanel],
    p: int,
    alpha: float,
    rates: Sequence[float] | None = None,
    ratio: float = 0.9,
    d_fixed: int | None = None,
    labels: Sequence[int] | None = None,
) -> MulticlassVpcModel:
    """Fit a two-group model for every pair of groups under one lag/basis policy.

    `rates` (default: flat 0.5 per lag) is shared by all pairs; pass alpha = 0
    to make the exponential boost irrelevant.
    """
    if len(panels) < 2:
        raise ValueError("need at least two groups")
    labels = tuple(labels) if labels is not None else tuple(range(len(panels)))
    if len(labels) != len(panels) or len(set(labels)) != len(labels):
        raise ValueError("labels must be distinct and match the panel count")
    rates = tuple(rates) if rates is not None else (0.5,) * (p + 1)
    pair_models = {}
    for i in range(len(panels)):
        for j in range(i + 1, len(panels)):
            pair_models[(labels[i], labels[j])] = train(
                panels[i],
                panels[j],
                p,
                alpha,
                rates,
                ratio=ratio,
                d_fixed=d_fixed,
                group_labels=(labels[i], labels[j]),
            )
    return MulticlassVpcModel(labels, pair_models, p)


def classify_multiclass(
    model: MulticlassVpcModel, ys: Sequence[Curve]
) -> tuple[int, dict[int, float]]:
    """Sequential pairwise tournament; ties eliminate the earlier group.

    Returns the winner and, per group, the distance recorded in the comparison
    that settled that group's fate.
    """
    if len(model.group_labels) < 2:
        raise ValueError("need at least two groups")
    distances: dict[int, float] = {}
    winner = model.group_labels[0]
    for challenger in model.group_labels[1:]:
        key = (winner, challenger) if (winner, challenger) in model.pair_models else (challenger, winner)
        pair = model.pair_models[key]
        label, d0, d1 = classify(pair, ys)
        by_label = {pair.group_labels[0]: d0, pair.group_labels[1]: d1}
        loser = challenger if label == winner else winner
        distances[loser] = by_label[loser]
        winner = label
    distances[winner] = {pair.group_labels[0]: d0, pair.group_labels[1]: d1}[winner]
    return winner, distances


# ---------------------------------------------------------------------------
# amplitude pre-filtering


def classify_pipeline(model: VpcModel, ys: Sequence[Curve]) -> tuple[int, float | None, float | None]:
    """Full decision path: amplitude prefilter, unit scaling, then the classifier.

    For a single-curve query on a model with a threshold, a norm above tau
    short-circuits to the high-variation group (distances are None). When the
    model was trained on unit-norm curves, queries are scaled likewise.
    """
    if model.tau is not None and len(ys) == 1:
        hit = amplitude_prefilter(model, ys[0])
        if hit is not None:
            return hit, None, None
    if model.scaled:
        panel = scale_to_unit(CurvePanel.from_curves(list(ys)))
        ys = panel.curves
    return classify(model, ys)


def amplitude_prefilter(model: VpcModel, y: Curve) -> int | None:
    """Label a query immediately when its norm exceeds the trained threshold.

    Returns the high-variation group's label for ||y|| > tau, else None (the
    caller should scale and run the full classifier).
    """
    if model.tau is None or model.high_group is None:
        raise ValueError("model carries no amplitude threshold")
    return model.high_group if l2_norm(y) > model.tau else None


def tune_tau(
    panel0: CurvePanel,
    panel1: CurvePanel,
    reps: int = 50,
    n_quantiles: int = 19,
    rng_seed: int = 0,
) -> tuple[float, int]:
    """Pick the amplitude threshold by cross-validated thresholding of curve norms.

    Candidates are quantiles of the pooled training norms; each repetition
    scores candidates on a random held-out half. Returns (tau, label of the
    higher-variation group).
    """
    norms0, norms1 = panel_norms(panel0), panel_norms(panel1)
    high = 1 if float(np.mean(norms1**2)) >= float(np.mean(norms0**2)) else 0
    norms = np.concatenate([norms0, norms1])
    is_high = np.concatenate(
        [np.full(norms0.size, high == 0), np.full(norms1.size, high == 1)]
    )
    candidates = np.quantile(norms, np.linspace(0.05, 0.95, n_quantiles))
    accs = np.zeros(candidates.size)
    for rep in range(reps):
        rng = _rep_rng(rng_seed, rep, 0)
        held = rng.random(norms.size) < 0.5
        if not held.any():
            continue
        above = norms[held][:, None] > candidates[None, :]
        accs += (above == is_high[held][:, None]).mean(axis=0)
    best = int(np.argmax(accs))
    return float(candidates[best]), high
