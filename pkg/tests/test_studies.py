"""Study-preset products beyond the acceptance thresholds."""

import json

import numpy as np
import pytest

from tackscan.cli import main
from tackscan.dataset import read_trace_table
from tackscan.modelfile import load_model
from tackscan.pipeline import run_reproduce

CAROUSEL_LITE = {
    "acquisition.traces_per_meter": "2",
    "acquisition.samples_per_trace": "512",
    "svm.grid_c": "10",
    "svm.grid_gamma_scale": "0.5",
    "svm.grid_epsilon": "10",
    "svm.folds": "2",
}

VENDEE_LITE = {
    "acquisition.traces_per_meter": "1",
    "acquisition.samples_per_trace": "256",
    "acquisition.time_window": "5e-9",
    "svm.grid_c": "10",
    "svm.grid_gamma_scale": "0.5",
    "svm.grid_epsilon": "10",
    "svm.folds": "2",
}


@pytest.fixture(scope="module")
def carousel_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("carousel")
    ok, summary = run_reproduce("carousel", out, dict(CAROUSEL_LITE))
    return out, ok, summary


def test_carousel_report_has_two_by_two_matrix(carousel_run):
    out, ok, _ = carousel_run
    assert ok
    kv = (out / "reports" / "tcsvm_report.kv").read_text()
    assert "labels = absent,present" in kv
    for key in ("count.absent.absent", "count.absent.present",
                "count.present.absent", "count.present.present"):
        assert key in kv


def test_carousel_model_is_single_binary(carousel_run):
    out, _, _ = carousel_run
    payload = json.loads((out / "models" / "tcsvm.json").read_text())
    assert payload["task"] == "tcsvm"
    # one binary estimator, not a pairwise ensemble
    assert "support_vectors" in payload["estimator"]
    assert "pairs" not in payload["estimator"]


def test_carousel_binary_map_has_two_gray_levels(carousel_run):
    out, _, _ = carousel_run
    lines = (out / "maps" / "tcsvm_map.pgm").read_text().splitlines()
    assert lines[0] == "P2"
    levels = {int(v) for line in lines[3:] for v in line.split()}
    # two class levels plus 0 between the measurement profiles
    assert levels == {0, 128, 255}


def test_summary_reports_macro_and_per_class_dice(carousel_run):
    out, _, summary = carousel_run
    kv = (out / "summary.kv").read_text()
    assert "tcsvm.macro_dice = " in kv
    assert "tcsvm.dice.absent = " in kv
    assert "tcsvm.dice.present = " in kv
    assert "macro dice" in summary


def test_carousel_six_profiles(carousel_run):
    out, _, _ = carousel_run
    data = read_trace_table(out / "dataset" / "trace_table.csv", out / "dataset" / "metadata.txt")
    assert data.metadata["profiles"] == "P1;P2;P3;P4;P5;P6"
    # longitudinal offsets from the layout
    ys = set(np.round(np.unique(data.y), 3).tolist())
    assert {0.8, 1.5, 1.9, 2.65}.issubset(ys)


@pytest.fixture(scope="module")
def vendee_lite_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("vendee_lite")
    ok, summary = run_reproduce("vendee", out, dict(VENDEE_LITE))
    return out, ok, summary


def test_vendee_profile_offsets(vendee_lite_run):
    out, _, _ = vendee_lite_run
    data = read_trace_table(out / "dataset" / "trace_table.csv", out / "dataset" / "metadata.txt")
    assert set(np.unique(data.y).tolist()) == {1.2, 2.5, 3.8}


def test_vendee_mcsvm_has_three_submodels(vendee_lite_run):
    out, _, _ = vendee_lite_run
    bundle = load_model(out / "models" / "mcsvm.json")
    assert len(bundle.estimator.models) == 3
    assert bundle.estimator.pairs == [("250", "300"), ("250", "450"), ("300", "450")]


def test_vendee_svr_predicts_quantities(vendee_lite_run):
    out, _, _ = vendee_lite_run
    lines = (out / "predictions" / "svr.csv").read_text().splitlines()
    header = lines[0].split(",")
    pred_col = header.index("predicted")
    values = np.array([float(l.split(",")[pred_col]) for l in lines[1:]])
    assert np.all((values > 100.0) & (values < 600.0))


def test_stage_failure_aborts_with_stage_name_and_exit_2(tmp_path):
    # a gate outside the time window breaks the feature stage
    code = main([
        "reproduce", "vendee", "--out", str(tmp_path),
        "--set", "acquisition.traces_per_meter=0.5",
        "--set", "acquisition.samples_per_trace=128",
        "--set", "acquisition.time_window=1e-9",
        "--set", "features.gate=0.3e-9:2.4e-9",
    ])
    assert code == 2
