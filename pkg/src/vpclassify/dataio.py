"""File formats: curve-panel CSV, model JSON, registries, break lists.

Panel CSV layout: the first line holds the grid points; every following line
is `curve_id,v_1,...,v_T`. Floats are written with repr so files and JSON
round-trip bit-exactly.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .classifier import DiscriminativeBasis, LagComponent, MulticlassVpcModel, VpcModel
from .funcgrid import CurvePanel, Grid, make_uniform_grid
from .operators import KernelOperator
from .segmented import BreakReport, SegmentRegistry

__all__ = [
    "read_panel_csv",
    "write_panel_csv",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
    "save_registry",
    "load_registry",
    "write_break_list",
    "read_break_list",
    "write_kernel_csv",
]

MODEL_FORMAT = "vpc-model/1"
MULTICLASS_FORMAT = "vpc-multiclass-model/1"
REGISTRY_FORMAT = "vpc-registry/1"


class PanelFormatError(ValueError):
    """Malformed panel CSV; the message names the offending row."""


def _fmt(x: float) -> str:
    return repr(float(x))


def write_panel_csv(path: str | Path, panel: CurvePanel, ids: Sequence[str] | None = None) -> None:
    path = Path(path)
    if ids is None:
        ids = [str(k) for k in range(len(panel))]
    if len(ids) != len(panel):
        raise ValueError("one id per curve required")
    lines = [",".join(_fmt(t) for t in panel.grid.points)]
    for cid, row in zip(ids, panel.values):
        lines.append(",".join([str(cid), *(_fmt(v) for v in row)]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _grid_from_points(points: np.ndarray) -> Grid:
    uniform = make_uniform_grid(points.size)
    if np.allclose(points, uniform.points, rtol=0.0, atol=1e-12):
        return uniform
    # non-uniform grids get trapezoid weights for their spacing
    gaps = np.diff(points)
    w = np.zeros(points.size)
    w[:-1] += gaps / 2.0
    w[1:] += gaps / 2.0
    return Grid(points, w / w.sum())


def read_panel_csv(path: str | Path, group_label: int | None = None) -> CurvePanel:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 2:
        raise PanelFormatError(f"{path}: need a grid row and at least one curve row")
    try:
        points = np.array([float(tok) for tok in lines[0].split(",")])
    except ValueError as exc:
        raise PanelFormatError(f"{path}: row 1: bad grid value ({exc})") from None
    grid = _grid_from_points(points)
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        tokens = line.split(",")
        if len(tokens) != points.size + 1:
            raise PanelFormatError(
                f"{path}: row {lineno}: expected {points.size + 1} fields, got {len(tokens)}"
            )
        try:
            rows.append([float(tok) for tok in tokens[1:]])
        except ValueError as exc:
            raise PanelFormatError(f"{path}: row {lineno}: bad value ({exc})") from None
    return CurvePanel(grid, np.array(rows), group_label)


# ---------------------------------------------------------------------------
# model JSON


def _grid_to_dict(grid: Grid) -> dict:
    return {"points": grid.points.tolist(), "weights": grid.weights.tolist()}


def _grid_from_dict(d: dict) -> Grid:
    return Grid(np.array(d["points"]), np.array(d["weights"]))


def _component_to_dict(comp: LagComponent) -> dict:
    return {
        "lag": comp.lag,
        "d": comp.basis.d,
        "eigenvalues": comp.basis.eigenvalues.tolist(),
        "functions": comp.basis.vectors.tolist(),
        "scores0": comp.scores0.tolist(),
        "scores1": comp.scores1.tolist(),
        "weight": comp.weight,
        "single_lag_rate": comp.single_lag_rate,
    }


def _component_from_dict(d: dict, grid: Grid) -> LagComponent:
    eigenvalues = np.array(d["eigenvalues"])
    basis = DiscriminativeBasis(
        int(d["lag"]),
        grid,
        eigenvalues,
        np.array(d["functions"]),
        int(d["d"]),
        float(eigenvalues.sum()),
    )
    return LagComponent(
        int(d["lag"]),
        basis,
        np.array(d["scores0"]),
        np.array(d["scores1"]),
        float(d["weight"]),
        float(d["single_lag_rate"]),
    )


def model_to_dict(model: VpcModel | MulticlassVpcModel) -> dict:
    if isinstance(model, MulticlassVpcModel):
        return {
            "format": MULTICLASS_FORMAT,
            "group_labels": list(model.group_labels),
            "max_lag": model.max_lag,
            "pairs": [
                {"labels": list(k), "model": model_to_dict(m)} for k, m in model.pair_models.items()
            ],
        }
    return {
        "format": MODEL_FORMAT,
        "grid": _grid_to_dict(model.grid),
        "max_lag": model.max_lag,
        "alpha": model.alpha,
        "ratio": model.ratio,
        "tau": model.tau,
        "high_group": model.high_group,
        "scaled": model.scaled,
        "group_labels": list(model.group_labels),
        "components": [_component_to_dict(c) for c in model.components],
    }


def model_from_dict(doc: dict) -> VpcModel | MulticlassVpcModel:
    fmt = doc.get("format")
    if fmt == MULTICLASS_FORMAT:
        pair_models = {}
        for entry in doc["pairs"]:
            sub = model_from_dict(entry["model"])
            pair_models[tuple(entry["labels"])] = sub
        return MulticlassVpcModel(tuple(doc["group_labels"]), pair_models, int(doc["max_lag"]))
    if fmt != MODEL_FORMAT:
        raise ValueError(f"unrecognized model format {fmt!r}")
    grid = _grid_from_dict(doc["grid"])
    components = tuple(_component_from_dict(c, grid) for c in doc["components"])
    return VpcModel(
        grid,
        int(doc["max_lag"]),
        components,
        float(doc["alpha"]),
        float(doc["ratio"]),
        None if doc.get("tau") is None else float(doc["tau"]),
        None if doc.get("high_group") is None else int(doc["high_group"]),
        bool(doc.get("scaled", False)),
        tuple(doc["group_labels"]),
    )


def save_model(path: str | Path, model: VpcModel | MulticlassVpcModel, manifest: dict | None = None) -> None:
    doc = model_to_dict(model)
    if manifest is not None:
        doc["manifest"] = manifest
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_model(path: str | Path) -> VpcModel | MulticlassVpcModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# registries, break lists, kernels


def save_registry(path: str | Path, registry: SegmentRegistry, manifest: dict | None = None) -> None:
    doc = {
        "format": REGISTRY_FORMAT,
        "grid": _grid_to_dict(registry.grid),
        "boundaries": list(registry.boundaries),
        "kernels": [op.kernel.tolist() for op in registry.operators],
    }
    if manifest is not None:
        doc["manifest"] = manifest
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_registry(path: str | Path) -> SegmentRegistry:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != REGISTRY_FORMAT:
        raise ValueError(f"unrecognized registry format {doc.get('format')!r}")
    grid = _grid_from_dict(doc["grid"])
    ops = tuple(KernelOperator(grid, np.array(k)) for k in doc["kernels"])
    return SegmentRegistry(grid, tuple(doc["boundaries"]), ops)


def write_break_list(path: str | Path, report: BreakReport) -> None:
    """One 1-based index per line: the curve after which a new segment begins."""
    Path(path).write_text("".join(f"{k}\n" for k in report.breaks), encoding="utf-8")


def read_break_list(path: str | Path) -> list[int]:
    lines = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()]
    return [int(ln) for ln in lines if ln]


def write_kernel_csv(path: str | Path, op: KernelOperator, grid_path: str | Path | None = None) -> None:
    """Kernel surface as T rows of T comma-separated values, plus a sidecar grid file."""
    path = Path(path)
    lines = [",".join(_fmt(v) for v in row) for row in op.kernel]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    side = Path(grid_path) if grid_path is not None else path.with_suffix(".grid.csv")
    side.write_text(",".join(_fmt(t) for t in op.grid.points) + "\n", encoding="utf-8")
