"""Command-line front end.

Subcommands: simulate, train, classify, features, evaluate, segments.
Exit codes: 0 success, 2 usage or input errors, 3 domain errors (untrainable
model, grid mismatch, failed verification). Every JSON output embeds a run
manifest; no timestamps are written, so identical invocations produce
identical files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .classifier import (
    classify,
    classify_pipeline,
    single_lag_rate,
    train,
    train_multiclass,
    tune,
    tune_tau,
)
from .dataio import (
    PanelFormatError,
    load_model,
    load_registry,
    read_break_list,
    read_panel_csv,
    save_model,
    save_registry,
    write_break_list,
    write_panel_csv,
)
from .errors import VpcError
from .experiments import ExperimentConfig, run_experiment
from .funcgrid import inner_product, make_uniform_grid, scale_to_unit
from .segmented import build_registry, classify_with_segments, detect_breaks
from .simgen import make_fma_spec, simulate_bspline_scores, simulate_fma, simulate_fourier_settings

USAGE_ERROR = 2
DOMAIN_ERROR = 3

DESIGNS = ("fma", "bspline", "fourier1", "fourier2")


class InputError(Exception):
    """Bad user input (missing file, malformed CSV, invalid value): exit code 2."""


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get("VPCLASSIFY_WORKERS", "1")))
    except ValueError:
        return 1


def _manifest(command: str, args: argparse.Namespace) -> dict:
    skip = {"func"}
    arguments = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    return {
        "command": command,
        "arguments": arguments,
        "seed": arguments.get("seed"),
        "versions": {
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "vpclassify": __version__,
        },
    }


def _load_panel(path: str, group: int | None = None):
    p = Path(path)
    if not p.exists():
        raise InputError(f"no such file: {p}")
    try:
        return read_panel_csv(p, group)
    except PanelFormatError as exc:
        raise InputError(str(exc)) from None


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.design not in DESIGNS:
        raise InputError(f"unknown design {args.design!r}; choose from {', '.join(DESIGNS)}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = make_uniform_grid(args.grid_size)
    if args.design == "fma":
        spec = make_fma_spec(args.seed)
        panels = (
            simulate_fma(spec, args.n, grid, 0),
            simulate_fma(spec, args.n, grid, 1),
        )
    elif args.design == "bspline":
        panels = simulate_bspline_scores(args.a2, args.n, grid, args.seed)
    else:
        setting = 1 if args.design == "fourier1" else 2
        panels = simulate_fourier_settings(setting, args.n, grid, args.seed)
    paths = []
    for g, panel in enumerate(panels):
        path = out_dir / f"group{g}.csv"
        write_panel_csv(path, panel)
        paths.append(str(path))
    sidecar = {
        "design": args.design,
        "n": args.n,
        "seed": args.seed,
        "grid_size": args.grid_size,
        "a2": args.a2 if args.design == "bspline" else None,
        "files": paths,
        "manifest": _manifest("simulate", args),
    }
    _write_json(out_dir / "simulation.json", sidecar)
    print(f"wrote {', '.join(paths)}")
    return 0


# ---------------------------------------------------------------------------
# train


def cmd_train(args: argparse.Namespace) -> int:
    panels = [_load_panel(path, g) for g, path in enumerate(args.panels)]
    if len(panels) < 2:
        raise InputError("training needs at least two group files")
    grid = panels[0].grid
    for p in panels[1:]:
        if p.grid != grid:
            raise VpcError("group files do not share a grid header")

    raw_panels = panels
    if args.scale:
        panels = [scale_to_unit(p) for p in panels]

    if len(panels) > 2:
        model = train_multiclass(panels, args.max_lag, args.alpha, ratio=args.ratio)
        save_model(args.out, model, manifest=_manifest("train", args))
        print(f"wrote multiclass model for {len(panels)} groups to {args.out}")
        return 0

    panel0, panel1 = panels
    cv_report = None
    if args.alpha_grid:
        report = tune(
            panel0,
            panel1,
            p_candidates=range(args.max_lag + 1),
            alpha_candidates=_float_list(args.alpha_grid),
            reps=args.reps,
            ratio=args.ratio,
            rng_seed=args.seed,
        )
        p, alpha = report.chosen
        rates = report.single_lag_rates[: p + 1]
        cv_report = report
    else:
        p, alpha = args.max_lag, args.alpha
        rates = [
            single_lag_rate(panel0, panel1, h, reps=args.reps, ratio=args.ratio, rng_seed=args.seed + 1 + h)
            for h in range(p + 1)
        ]

    tau = high = None
    if args.tau_cv:
        tau, high = tune_tau(raw_panels[0], raw_panels[1], reps=args.reps, rng_seed=args.seed)

    model = train(
        panel0,
        panel1,
        p,
        alpha,
        rates,
        ratio=args.ratio,
        tau=tau,
        high_group=high,
        scaled=args.scale,
    )
    save_model(args.out, model, manifest=_manifest("train", args))
    print(f"wrote model (p={p}, alpha={alpha}) to {args.out}")
    if cv_report is not None:
        doc = {
            "p_candidates": list(cv_report.p_candidates),
            "alpha_candidates": list(cv_report.alpha_candidates),
            "mean_rates": [
                {"p": p_, "alpha": a_, "rate": r} for (p_, a_), r in sorted(cv_report.mean_rates.items())
            ],
            "single_lag_rates": list(cv_report.single_lag_rates),
            "repetitions": cv_report.repetitions,
            "chosen": {"p": cv_report.chosen[0], "alpha": cv_report.chosen[1]},
            "manifest": _manifest("train", args),
        }
        cv_path = Path(args.cv_report) if args.cv_report else Path(args.out).with_suffix(".cv.json")
        _write_json(cv_path, doc)
        print(f"wrote tuning report to {cv_path}")
    return 0


# ---------------------------------------------------------------------------
# classify


def cmd_classify(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    panel = _load_panel(args.curves)
    if len(panel) == 0:
        raise InputError(f"{args.curves}: no curves")
    block = args.block if args.block is not None else model.max_lag + 1
    expected = model.max_lag + 1
    if block != expected:
        raise InputError(f"block length {block} does not match the model (expected {expected})")
    if len(panel) % block != 0:
        raise InputError(
            f"{len(panel)} curves do not split into blocks of {block}; trailing remainder rejected"
        )
    multiclass = hasattr(model, "pair_models")
    labels_header = (
        ["block_index", "label"]
        + ([f"D_{g}" for g in model.group_labels] if multiclass else ["D_0", "D_1"])
    )
    lines = [",".join(labels_header)]
    for b in range(len(panel) // block):
        ys = [panel.curve(k) for k in range(b * block, (b + 1) * block)]
        if multiclass:
            from .classifier import classify_multiclass

            label, dists = classify_multiclass(model, ys)
            cells = [repr(dists[g]) for g in model.group_labels]
        else:
            label, d0, d1 = classify_pipeline(model, ys)
            cells = [repr(d0), repr(d1)]
        lines.append(",".join([str(b), str(label), *cells]))
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"classified {len(panel) // block} blocks -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# features


def cmd_features(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    if hasattr(model, "pair_models"):
        raise InputError("feature export works on two-group models")
    if not 0 <= args.lag <= model.max_lag:
        raise InputError(f"lag {args.lag} outside the model range 0..{model.max_lag}")
    comp = next((c for c in model.components if c.lag == args.lag), None)
    out = Path(args.out)
    if comp is None:
        print(f"warning: lag {args.lag} was dropped during training; writing empty output")
        out.write_text("", encoding="utf-8")
        return 0
    basis = comp.basis
    lines = [",".join(["eigenvalue", *(repr(float(v)) for v in basis.eigenvalues[: basis.d])])]
    for i, t in enumerate(model.grid.points):
        lines.append(",".join([repr(float(t)), *(repr(float(basis.vectors[j, i])) for j in range(basis.d))]))
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    if args.verify:
        gram = np.array(
            [[inner_product(a, b) for b in basis.functions[: basis.d]] for a in basis.functions[: basis.d]]
        )
        err = float(np.abs(gram - np.eye(basis.d)).max())
        if err > 1e-6:
            raise VpcError(f"feature functions fail orthonormality check (max error {err:.2e})")
        print(f"orthonormality verified (max deviation {err:.2e})")
    print(f"wrote {basis.d} feature functions for lag {args.lag} -> {out}")
    return 0


# ---------------------------------------------------------------------------
# evaluate


def cmd_evaluate(args: argparse.Namespace) -> int:
    settings: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise InputError(f"no such config file: {path}")
        settings = json.loads(path.read_text(encoding="utf-8"))
    for key in (
        "design",
        "repetitions",
        "seed",
        "n_train",
        "p_values",
        "a2_values",
        "d_values",
        "n_test",
        "alpha",
        "ratio",
        "cv_reps",
        "grid_size",
        "workers",
    ):
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    if "design" not in settings:
        raise InputError("a design is required (flag --design or config file)")
    try:
        config = ExperimentConfig(
            design=settings["design"],
            repetitions=int(settings.get("repetitions", 200)),
            seed=int(settings.get("seed", 0)),
            n_train=tuple(settings.get("n_train", (100,))),
            p_values=tuple(settings.get("p_values", (0, 1, 2, 3, 4))),
            a2_values=tuple(settings.get("a2_values", (20.0, 40.0, 60.0, 80.0))),
            d_values=tuple(None if d in ("full", None) else int(d) for d in settings.get("d_values", (1, 2, 3, 4, 5, 6, 7, 8, 9, "full"))),
            n_test=int(settings.get("n_test", 100)),
            alpha=float(settings.get("alpha", 10.0)),
            ratio=float(settings.get("ratio", 0.9)),
            cv_reps=int(settings.get("cv_reps", 30)),
            grid_size=int(settings.get("grid_size", 101)),
            workers=int(settings.get("workers", _default_workers())),
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None
    rows = run_experiment(config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = {
        "design": config.design,
        "rows": rows,
        "manifest": _manifest("evaluate", args),
    }
    _write_json(out_dir / "report.json", report)
    header = list(rows[0].keys())
    csv_lines = [",".join(header)]
    for row in rows:
        csv_lines.append(",".join(_cell(row[k]) for k in header))
    (out_dir / "table.csv").write_text("\n".join(csv_lines) + "\n", encoding="utf-8")
    print(f"wrote {out_dir / 'report.json'} and {out_dir / 'table.csv'}")
    return 0


def _cell(value) -> str:
    if isinstance(value, float):
        return "NA" if np.isnan(value) else f"{value:.6f}"
    return str(value)


# ---------------------------------------------------------------------------
# segments


def cmd_segments_detect(args: argparse.Namespace) -> int:
    panels = [_load_panel(p) for p in args.panels]
    report = detect_breaks(
        panels if len(panels) > 1 else panels[0],
        level=args.level,
        min_seg=args.min_seg,
        permutations=args.permutations,
        rng_seed=args.seed,
    )
    doc = {
        "breaks": list(report.breaks),
        "statistics": list(report.statistics),
        "p_values": list(report.p_values),
        "level": report.level,
        "manifest": _manifest("segments detect", args),
    }
    _write_json(Path(args.out), doc)
    if args.break_list:
        write_break_list(args.break_list, report)
    print(f"detected {len(report.breaks)} break(s) -> {args.out}")
    return 0


def cmd_segments_build(args: argparse.Namespace) -> int:
    panel = _load_panel(args.panel)
    breaks = read_break_list(args.breaks) if args.breaks else []
    registry = build_registry(panel, breaks)
    save_registry(args.out, registry, manifest=_manifest("segments build", args))
    print(f"built registry with {registry.n_segments} segment(s) -> {args.out}")
    return 0


def cmd_segments_classify(args: argparse.Namespace) -> int:
    reg0 = load_registry(args.registry0)
    reg1 = load_registry(args.registry1)
    panel = _load_panel(args.curves)
    if len(panel) == 0:
        raise InputError(f"{args.curves}: no curves")
    lines = ["curve_index,label,D_0,D_1"]
    for k in range(len(panel)):
        label, d0, d1 = classify_with_segments(reg0, reg1, panel.curve(k), d=args.d)
        lines.append(f"{k},{label},{d0!r},{d1!r}")
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"classified {len(panel)} curve(s) -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vpclassify",
        description="Classify functional data by their lagged covariance structure.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="write synthetic group CSVs for a shipped design")
    sim.add_argument("--design", required=True, help=f"one of: {', '.join(DESIGNS)}")
    sim.add_argument("--n", type=int, required=True, help="curves per group")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--grid-size", type=int, default=101, dest="grid_size")
    sim.add_argument("--a2", type=float, default=80.0, help="discrepancy level for the bspline design")
    sim.add_argument("--out-dir", required=True, dest="out_dir")
    sim.set_defaults(func=cmd_simulate)

    tr = sub.add_parser("train", help="fit a model from group CSVs")
    tr.add_argument("panels", nargs="+", help="per-group curve CSVs (two or more)")
    tr.add_argument("--out", required=True)
    tr.add_argument("--max-lag", type=int, default=0, dest="max_lag")
    tr.add_argument("--alpha", type=float, default=0.0)
    tr.add_argument("--alpha-grid", default=None, dest="alpha_grid", help="comma list; enables tuning over lags 0..max-lag")
    tr.add_argument("--ratio", type=float, default=0.9)
    tr.add_argument("--reps", type=int, default=50, help="cross-validation repetitions")
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--scale", action="store_true", help="scale training curves to unit norm")
    tr.add_argument("--tau-cv", action="store_true", dest="tau_cv", help="tune an amplitude threshold")
    tr.add_argument("--cv-report", default=None, dest="cv_report")
    tr.set_defaults(func=cmd_train)

    cl = sub.add_parser("classify", help="label blocks of consecutive curves")
    cl.add_argument("model")
    cl.add_argument("curves")
    cl.add_argument("--out", required=True)
    cl.add_argument("--block", type=int, default=None, help="block length (must equal model max lag + 1)")
    cl.set_defaults(func=cmd_classify)

    ft = sub.add_parser("features", help="export the feature functions of one lag")
    ft.add_argument("model")
    ft.add_argument("--lag", type=int, required=True)
    ft.add_argument("--out", required=True)
    ft.add_argument("--verify", action="store_true", help="check orthonormality of the exported columns")
    ft.set_defaults(func=cmd_features)

    ev = sub.add_parser("evaluate", help="repetition-averaged rates for a shipped design")
    ev.add_argument("--config", default=None, help="JSON file mirroring the flags below")
    ev.add_argument("--design", default=None)
    ev.add_argument("--repetitions", type=int, default=None)
    ev.add_argument("--seed", type=int, default=None)
    ev.add_argument("--n-train", type=_int_list, default=None, dest="n_train")
    ev.add_argument("--p-values", type=_int_list, default=None, dest="p_values")
    ev.add_argument("--a2-values", type=_float_list, default=None, dest="a2_values")
    ev.add_argument("--d-values", type=_int_list, default=None, dest="d_values")
    ev.add_argument("--n-test", type=int, default=None, dest="n_test")
    ev.add_argument("--alpha", type=float, default=None)
    ev.add_argument("--ratio", type=float, default=None)
    ev.add_argument("--cv-reps", type=int, default=None, dest="cv_reps")
    ev.add_argument("--grid-size", type=int, default=None, dest="grid_size")
    ev.add_argument("--workers", type=int, default=None)
    ev.add_argument("--out-dir", required=True, dest="out_dir")
    ev.set_defaults(func=cmd_evaluate)

    seg = sub.add_parser("segments", help="change-point detection and nearest-segment classification")
    seg_sub = seg.add_subparsers(dest="segments_command", required=True)

    sd = seg_sub.add_parser("detect", help="scan a panel (or channel panels) for covariance breaks")
    sd.add_argument("panels", nargs="+", help="curve CSVs; several files are treated as channels")
    sd.add_argument("--out", required=True)
    sd.add_argument("--break-list", default=None, dest="break_list", help="also write a plain break-index list")
    sd.add_argument("--level", type=float, default=0.05)
    sd.add_argument("--min-seg", type=int, default=20, dest="min_seg")
    sd.add_argument("--permutations", type=int, default=200)
    sd.add_argument("--seed", type=int, default=0)
    sd.set_defaults(func=cmd_segments_detect)

    sb = seg_sub.add_parser("build", help="estimate per-segment covariance operators")
    sb.add_argument("panel")
    sb.add_argument("breaks", nargs="?", default=None, help="break list file (omit for one segment)")
    sb.add_argument("--out", required=True)
    sb.set_defaults(func=cmd_segments_build)

    sc = seg_sub.add_parser("classify", help="nearest-segment classification of single curves")
    sc.add_argument("registry0")
    sc.add_argument("registry1")
    sc.add_argument("curves")
    sc.add_argument("--out", required=True)
    sc.add_argument("--d", type=int, default=None)
    sc.set_defaults(func=cmd_segments_classify)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except VpcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DOMAIN_ERROR


if __name__ == "__main__":
    sys.exit(main())
