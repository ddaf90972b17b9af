"""Model-file round trips: reloaded models reproduce predictions exactly."""

import numpy as np
import pytest

from tackscan.features import FeatureConfig, fit_normalizer
from tackscan.modelfile import ModelBundle, SplitRecord, load_model, save_model
from tackscan.scene import ValidationError
from tackscan.svm import (
    KernelSpec,
    predict_binary,
    predict_multiclass,
    predict_svr,
    train_binary,
    train_multiclass,
    train_svr,
)

RBF = KernelSpec("rbf", gamma=0.3)


@pytest.fixture
def training_data():
    rng = np.random.default_rng(13)
    x = np.vstack([rng.normal(-1.0, 0.6, (40, 6)), rng.normal(1.0, 0.6, (40, 6))])
    y = np.array([-1.0] * 40 + [1.0] * 40)
    return x, y, rng.standard_normal((30, 6))


def bundle_for(estimator, task, x):
    return ModelBundle(
        task=task,
        feature_config=FeatureConfig(gate=(0.0, 3e-9)),
        normalizer=fit_normalizer(x),
        estimator=estimator,
        class_order=["absent", "present"] if task == "tcsvm" else [],
        scheme_kind="binary" if task == "tcsvm" else "none",
        scheme_quantities=[],
        split=SplitRecord("abc123", "features", "random", 0.7, 0, [1, 2, 3]),
    )


def test_binary_roundtrip_bit_identical(tmp_path, training_data):
    x, y, probe = training_data
    model = train_binary(x, y, 10.0, RBF)
    bundle = bundle_for(model, "tcsvm", x)
    path = tmp_path / "model.json"
    save_model(bundle, path)
    restored = load_model(path)
    l1, d1 = predict_binary(model, probe)
    l2, d2 = predict_binary(restored.estimator, probe)
    assert np.array_equal(d1, d2)
    assert np.array_equal(l1, l2)
    assert restored.split.test_indices == [1, 2, 3]
    assert restored.feature_config == bundle.feature_config


def test_multiclass_roundtrip_bit_identical(tmp_path):
    rng = np.random.default_rng(19)
    x = np.vstack([rng.normal(c, 0.3, (20, 4)) for c in (-2.0, 0.0, 2.0)])
    labels = np.asarray(["lo"] * 20 + ["mid"] * 20 + ["hi"] * 20, dtype=object)
    model = train_multiclass(x, labels, ["lo", "mid", "hi"], 5.0, RBF)
    bundle = ModelBundle(
        task="mcsvm",
        feature_config=FeatureConfig(gate=(0.0, 3e-9)),
        normalizer=fit_normalizer(x),
        estimator=model,
        class_order=["lo", "mid", "hi"],
        scheme_kind="four_class",
        scheme_quantities=[],
    )
    path = tmp_path / "mc.json"
    save_model(bundle, path)
    restored = load_model(path)
    probe = rng.standard_normal((50, 4))
    p1, v1, d1 = predict_multiclass(model, probe)
    p2, v2, d2 = predict_multiclass(restored.estimator, probe)
    assert np.array_equal(d1, d2)
    assert np.array_equal(p1, p2)
    assert restored.estimator.pairs == model.pairs


def test_svr_roundtrip_bit_identical(tmp_path):
    rng = np.random.default_rng(23)
    x = rng.uniform(-1, 1, (60, 3))
    y = 100.0 + 250.0 * x[:, 0]
    model = train_svr(x, y, 50.0, 5.0, RBF)
    bundle = ModelBundle(
        task="svr",
        feature_config=FeatureConfig(gate=(0.0, 3e-9)),
        normalizer=fit_normalizer(x),
        estimator=model,
        class_order=[],
        scheme_kind="none",
        scheme_quantities=[],
    )
    path = tmp_path / "svr.json"
    save_model(bundle, path)
    restored = load_model(path)
    probe = rng.uniform(-1, 1, (40, 3))
    assert np.array_equal(predict_svr(model, probe), predict_svr(restored.estimator, probe))


def test_model_file_is_versioned_json(tmp_path, training_data):
    import json

    x, y, _ = training_data
    bundle = bundle_for(train_binary(x, y, 1.0, RBF), "tcsvm", x)
    path = tmp_path / "m.json"
    save_model(bundle, path)
    payload = json.loads(path.read_text())
    assert payload["format_version"] == 1
    assert payload["estimator"]["kernel"]["kind"] == "rbf"
    assert "normalizer" in payload


def test_wrong_version_rejected(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"format_version": 99}')
    with pytest.raises(ValidationError, match="version"):
        load_model(path)


def test_garbage_file_rejected(tmp_path):
    path = tmp_path / "junk.json"
    path.write_text("not json at all")
    with pytest.raises(ValidationError, match="not a model file"):
        load_model(path)
