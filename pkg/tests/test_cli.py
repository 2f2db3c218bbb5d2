import json

import numpy as np
import pytest

from vpclassify.cli import main
from vpclassify.dataio import load_model, read_panel_csv, write_panel_csv
from vpclassify.funcgrid import inner_product, make_uniform_grid
from vpclassify.simgen import make_fma_spec, simulate_fma, simulate_fourier_settings

from conftest import random_panel


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def sim_dir(tmp_path):
    out = tmp_path / "sim"
    assert run("simulate", "--design", "fma", "--n", 40, "--seed", 7, "--grid-size", 51, "--out-dir", out) == 0
    return out


class TestSimulate:
    def test_writes_group_files(self, sim_dir):
        for g in (0, 1):
            panel = read_panel_csv(sim_dir / f"group{g}.csv")
            assert len(panel) == 40
        sidecar = json.loads((sim_dir / "simulation.json").read_text())
        assert sidecar["design"] == "fma"
        assert sidecar["manifest"]["command"] == "simulate"

    def test_rerun_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run("simulate", "--design", "fourier1", "--n", 10, "--seed", 3, "--out-dir", out) == 0
        assert (a / "group0.csv").read_bytes() == (b / "group0.csv").read_bytes()
        assert (a / "group1.csv").read_bytes() == (b / "group1.csv").read_bytes()
        # a rerun into the same directory reproduces the sidecar too
        before = (a / "simulation.json").read_text()
        assert run("simulate", "--design", "fourier1", "--n", 10, "--seed", 3, "--out-dir", a) == 0
        assert (a / "simulation.json").read_text() == before

    def test_unknown_design(self, tmp_path):
        assert run("simulate", "--design", "nope", "--n", 5, "--out-dir", tmp_path / "x") == 2


class TestTrain:
    def test_fixed_parameters(self, sim_dir, tmp_path):
        model_path = tmp_path / "model.json"
        code = run(
            "train", sim_dir / "group0.csv", sim_dir / "group1.csv",
            "--out", model_path, "--max-lag", 0, "--alpha", 0, "--reps", 5,
        )
        assert code == 0
        model = load_model(model_path)
        assert model.max_lag == 0 and len(model.components) == 1

    def test_missing_file(self, tmp_path):
        assert run("train", tmp_path / "none.csv", tmp_path / "none2.csv", "--out", tmp_path / "m.json") == 2

    def test_tuning_writes_cv_report(self, sim_dir, tmp_path):
        model_path = tmp_path / "model.json"
        code = run(
            "train", sim_dir / "group0.csv", sim_dir / "group1.csv",
            "--out", model_path, "--max-lag", 1, "--alpha-grid", "0,10", "--reps", 6, "--seed", 1,
        )
        assert code == 0
        report = json.loads(model_path.with_suffix(".cv.json").read_text())
        assert {"p": report["chosen"]["p"], "alpha": report["chosen"]["alpha"]}
        assert len(report["mean_rates"]) == 4

    def test_multiclass_model(self, tmp_path, grid64):
        paths = []
        for g in range(3):
            p = tmp_path / f"g{g}.csv"
            write_panel_csv(p, random_panel(grid64, 10, seed=g, scale=1.0 + g))
            paths.append(p)
        out = tmp_path / "multi.json"
        assert run("train", *paths, "--out", out, "--max-lag", 0) == 0
        doc = json.loads(out.read_text())
        assert doc["format"] == "vpc-multiclass-model/1"
        assert len(doc["pairs"]) == 3


class TestClassify:
    def test_resubstitution_sanity(self, tmp_path):
        # a model trained on well-separated groups relabels its own training
        # curves accurately
        grid = make_uniform_grid(51)
        spec = make_fma_spec(11)
        g0 = tmp_path / "g0.csv"
        g1 = tmp_path / "g1.csv"
        write_panel_csv(g0, simulate_fma(spec, 120, grid, 0, seed=1))
        write_panel_csv(g1, simulate_fma(spec, 120, grid, 1, seed=2))
        model_path = tmp_path / "model.json"
        assert run("train", g0, g1, "--out", model_path, "--max-lag", 0, "--alpha", 10, "--reps", 10) == 0
        labels_path = tmp_path / "labels.csv"
        assert run("classify", model_path, g0, "--out", labels_path) == 0
        rows = labels_path.read_text().strip().splitlines()[1:]
        labels = [int(r.split(",")[1]) for r in rows]
        assert len(labels) == 120
        assert labels.count(0) / len(labels) >= 0.9

    def test_empty_curve_file(self, sim_dir, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        model_path = tmp_path / "model.json"
        run("train", sim_dir / "group0.csv", sim_dir / "group1.csv", "--out", model_path, "--max-lag", 0, "--reps", 4)
        assert run("classify", model_path, empty, "--out", tmp_path / "l.csv") == 2

    def test_block_mismatch_names_expected_length(self, sim_dir, tmp_path, capsys):
        model_path = tmp_path / "model.json"
        run(
            "train", sim_dir / "group0.csv", sim_dir / "group1.csv",
            "--out", model_path, "--max-lag", 2, "--alpha", 0, "--reps", 6,
        )
        code = run("classify", model_path, sim_dir / "group0.csv", "--out", tmp_path / "l.csv", "--block", 2)
        assert code == 2
        assert "expected 3" in capsys.readouterr().err

    def test_remainder_rejected(self, sim_dir, tmp_path):
        model_path = tmp_path / "model.json"
        run(
            "train", sim_dir / "group0.csv", sim_dir / "group1.csv",
            "--out", model_path, "--max-lag", 2, "--alpha", 0, "--reps", 6,
        )
        # 40 curves do not split into blocks of 3
        assert run("classify", model_path, sim_dir / "group0.csv", "--out", tmp_path / "l.csv") == 2


class TestFeatures:
    @pytest.fixture
    def fourier_model(self, tmp_path):
        grid = make_uniform_grid(101)
        p0, p1 = simulate_fourier_settings(1, 600, grid, seed=5)
        g0, g1 = tmp_path / "f0.csv", tmp_path / "f1.csv"
        write_panel_csv(g0, p0)
        write_panel_csv(g1, p1)
        model_path = tmp_path / "fmodel.json"
        assert run("train", g0, g1, "--out", model_path, "--max-lag", 0, "--alpha", 0, "--reps", 5) == 0
        return model_path

    def test_export_with_verification(self, fourier_model, tmp_path):
        out = tmp_path / "features.csv"
        assert run("features", fourier_model, "--lag", 0, "--out", out, "--verify") == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("eigenvalue,")
        assert len(lines) == 1 + 101

    def test_leading_features_live_on_differing_coordinates(self, fourier_model, tmp_path):
        out = tmp_path / "features.csv"
        assert run("features", fourier_model, "--lag", 0, "--out", out) == 0
        lines = [r.split(",") for r in out.read_text().strip().splitlines()]
        d = len(lines[0]) - 1
        grid = make_uniform_grid(101)
        t = grid.points
        # span of the four score coordinates whose variances differ
        span = [
            np.sqrt(2) * np.cos(2 * np.pi * t),
            np.sqrt(2) * np.sin(2 * np.pi * t),
            np.sqrt(2) * np.cos(4 * np.pi * t),
            np.sqrt(2) * np.sin(4 * np.pi * t),
        ]
        values = np.array([[float(v) for v in row] for row in lines[1:]])
        for j in range(min(d, 4)):
            feat = values[:, 1 + j]
            energy = sum(float(np.sum(grid.weights * feat * b)) ** 2 for b in span)
            total = float(np.sum(grid.weights * feat * feat))
            assert energy / total >= 0.8

    def test_lag_out_of_range(self, fourier_model, tmp_path):
        assert run("features", fourier_model, "--lag", 5, "--out", tmp_path / "f.csv") == 2


class TestEvaluate:
    def test_single_repetition_reports_na(self, tmp_path):
        out = tmp_path / "eval"
        code = run(
            "evaluate", "--design", "bspline", "--repetitions", 1, "--seed", 1,
            "--a2-values", "80", "--n-train", "40", "--n-test", "20",
            "--grid-size", 51, "--out-dir", out,
        )
        assert code == 0
        table = (out / "table.csv").read_text().strip().splitlines()
        assert "NA" in table[1]
        report = json.loads((out / "report.json").read_text())
        assert report["design"] == "bspline"

    def test_config_file_mirrors_flags(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({
            "design": "fourier1", "repetitions": 2, "seed": 3,
            "d_values": [2, 4], "n_train": [60], "n_test": 30, "grid_size": 51,
        }))
        out = tmp_path / "eval"
        assert run("evaluate", "--config", config, "--out-dir", out) == 0
        rows = (out / "table.csv").read_text().strip().splitlines()
        assert len(rows) == 3  # header + one row per dimension

    def test_missing_design(self, tmp_path):
        assert run("evaluate", "--out-dir", tmp_path / "x") == 2


class TestSegmentsCli:
    def test_detect_build_classify_flow(self, tmp_path):
        grid = make_uniform_grid(32)
        rng = np.random.default_rng(21)
        values0 = rng.standard_normal((120, 32))
        values0[60:] *= 2.5
        values1 = 0.7 * rng.standard_normal((120, 32))
        from vpclassify.funcgrid import CurvePanel

        g0, g1 = tmp_path / "s0.csv", tmp_path / "s1.csv"
        write_panel_csv(g0, CurvePanel(grid, values0))
        write_panel_csv(g1, CurvePanel(grid, values1))

        breaks_json = tmp_path / "breaks.json"
        breaks_txt = tmp_path / "breaks.txt"
        assert run(
            "segments", "detect", g0, "--out", breaks_json, "--break-list", breaks_txt,
            "--min-seg", 20, "--permutations", 100, "--seed", 4,
        ) == 0
        doc = json.loads(breaks_json.read_text())
        assert any(abs(b - 60) <= 10 for b in doc["breaks"])

        reg0, reg1 = tmp_path / "reg0.json", tmp_path / "reg1.json"
        assert run("segments", "build", g0, breaks_txt, "--out", reg0) == 0
        assert run("segments", "build", g1, "--out", reg1) == 0

        labels = tmp_path / "labels.csv"
        assert run("segments", "classify", reg0, reg1, g0, "--out", labels) == 0
        rows = labels.read_text().strip().splitlines()
        assert rows[0] == "curve_index,label,D_0,D_1"
        assert len(rows) == 121

    def test_registry_round_trip_through_files(self, tmp_path, grid64):
        g = tmp_path / "g.csv"
        write_panel_csv(g, random_panel(grid64, 30, seed=5))
        out = tmp_path / "reg.json"
        assert run("segments", "build", g, "--out", out) == 0
        doc = json.loads(out.read_text())
        assert doc["boundaries"] == [0, 30]
