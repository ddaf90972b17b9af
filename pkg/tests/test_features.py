"""Feature extraction, gating, and normalization."""

import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from tackscan.features import (
    FeatureConfig,
    NoArrivalError,
    Normalizer,
    apply_normalizer,
    extract_features,
    feature_dimension,
    feature_names,
    fit_normalizer,
    gate_trace,
)
from tackscan.forward import (
    AcquisitionSpec,
    AScan,
    PulseSpec,
    layered_reflection_response,
    synthesize_ascan,
)
from tackscan.scene import Layer, ValidationError

ACQ = AcquisitionSpec(time_window=20e-9, samples_per_trace=2048)
PULSE = PulseSpec()

ALL_FAMILIES = (
    "window_energy",
    "window_peak_amplitude",
    "peak_time",
    "spectral_centroid",
    "spectral_band_energies",
    "raw_decimated",
)


def echo_trace(depth=0.06, eps=5.0, noise=None, seed=0):
    acq = AcquisitionSpec(
        time_window=20e-9, samples_per_trace=2048, noise_snr_db=noise, seed=seed
    )
    stack = (
        Layer("incidence", 0.0, eps),
        Layer("layer", depth, eps),
        Layer("bottom", 0.0, 9.0, half_space=True),
    )
    resp = layered_reflection_response(stack, acq.frequencies())
    return synthesize_ascan(resp, PULSE, acq)


# ---------------------------------------------------------------------------
# Gating
# ---------------------------------------------------------------------------
def test_full_window_gate_is_identity():
    a = echo_trace()
    gated = gate_trace(a, (0.0, ACQ.time_window))
    assert np.array_equal(gated, a.samples)


def test_auto_gate_on_zero_trace_raises():
    a = AScan(np.zeros(2048), ACQ.dt, (0.0, 0.0))
    with pytest.raises(NoArrivalError, match="no-arrival"):
        gate_trace(a, "auto")


def test_inverted_gate_rejected():
    with pytest.raises(ValidationError):
        FeatureConfig(gate=(2e-9, 1e-9))


def test_gate_excluding_echo_drops_energy():
    a = echo_trace(depth=0.06, eps=5.0)  # echo at ~0.894 ns
    inside = gate_trace(a, (0.4e-9, 1.4e-9))
    outside = gate_trace(a, (3.0e-9, 19.0e-9))
    e_inside = float(np.sum(inside**2))
    e_outside = float(np.sum(outside**2))
    assert e_outside <= 0.01 * e_inside


# ---------------------------------------------------------------------------
# Extraction
# ---------------------------------------------------------------------------
def test_zero_trace_gives_zero_energy_features():
    a = AScan(np.zeros(2048), ACQ.dt, (0.0, 0.0))
    cfg = FeatureConfig(gate=(0.0, 5e-9))
    vec = extract_features(a, cfg)
    names = feature_names(cfg)
    for name, value in zip(names, vec):
        if name.startswith(("win_energy", "win_peak", "band_energy")):
            assert value == 0.0


def test_amplitude_scaling_homogeneity():
    a = echo_trace()
    cfg = FeatureConfig(gate=(0.0, 3e-9))
    v1 = extract_features(a, cfg)
    doubled = AScan(2.0 * a.samples, a.dt, a.position)
    v2 = extract_features(doubled, cfg)
    names = feature_names(cfg)
    for name, x1, x2 in zip(names, v1, v2):
        if name.startswith(("win_energy", "band_energy")):
            assert_allclose(x2, 4.0 * x1, rtol=1e-12)
        elif name == "peak_time":
            assert x2 == x1


def test_dimension_formula_matches_output_length():
    for include in (
        ALL_FAMILIES,
        ("window_energy",),
        ("window_energy", "peak_time"),
        ("raw_decimated",),
        ("spectral_band_energies", "spectral_centroid"),
    ):
        for wc in (1, 8, 16):
            cfg = FeatureConfig(gate=(0.0, 4e-9), window_count=wc, include=include, raw_count=24)
            # independent count: sum of documented family sizes
            expected = (
                wc * ("window_energy" in include)
                + wc * ("window_peak_amplitude" in include)
                + ("peak_time" in include)
                + ("spectral_centroid" in include)
                + 6 * ("spectral_band_energies" in include)
                + 24 * ("raw_decimated" in include)
            )
            assert feature_dimension(cfg) == expected
            a = echo_trace()
            assert extract_features(a, cfg).size == expected
            assert len(feature_names(cfg)) == expected


def test_extraction_deterministic():
    a = echo_trace(noise=20.0, seed=4)
    cfg = FeatureConfig(gate=(0.0, 4e-9), include=ALL_FAMILIES)
    assert np.array_equal(extract_features(a, cfg), extract_features(a, cfg))


def test_non_finite_samples_rejected():
    bad = np.zeros(2048)
    bad[3] = np.nan
    with pytest.raises(ValidationError):
        extract_features(AScan(bad, ACQ.dt, (0.0, 0.0)), FeatureConfig(gate=(0.0, 4e-9)))


def test_empty_family_set_rejected():
    with pytest.raises(ValidationError):
        FeatureConfig(include=())


def test_translation_covariance():
    a = echo_trace()
    k = 37
    shifted = AScan(np.roll(a.samples, k), a.dt, a.position)
    gate = (0.2e-9, 3.2e-9)
    gate_shifted = (gate[0] + k * a.dt, gate[1] + k * a.dt)
    cfg = FeatureConfig(gate=gate)
    cfg_shifted = FeatureConfig(gate=gate_shifted)
    v1 = extract_features(a, cfg)
    v2 = extract_features(shifted, cfg_shifted)
    names = feature_names(cfg)
    for name, x1, x2 in zip(names, v1, v2):
        if name == "peak_time":
            assert_allclose(x2 - x1, k * a.dt, atol=1e-15)
        elif name in ("spectral_centroid",) or name.startswith("band_energy"):
            assert_allclose(x2, x1, rtol=1e-6, atol=1e-12)
        else:
            assert_allclose(x2, x1, rtol=1e-9, atol=1e-15)


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------
def test_fit_apply_zscore():
    rng = np.random.default_rng(0)
    mat = rng.normal(3.0, 2.5, size=(200, 7))
    norm = fit_normalizer(mat)
    z = apply_normalizer(norm, mat)
    assert_allclose(z.mean(axis=0), 0.0, atol=1e-9)
    assert_allclose(z.var(axis=0), 1.0, atol=1e-6)


def test_zero_variance_columns_pass_through():
    mat = np.tile([1.5, -2.0, 0.25], (10, 1))
    norm = fit_normalizer(mat)
    assert norm.passthrough.all()
    z = apply_normalizer(norm, mat)
    assert np.array_equal(z, mat)


def test_normalizer_needs_two_vectors():
    with pytest.raises(ValidationError):
        fit_normalizer(np.ones((1, 4)))


def test_normalizer_roundtrip_bit_exact():
    rng = np.random.default_rng(5)
    mat = rng.standard_normal((50, 9))
    norm = fit_normalizer(mat)
    restored = Normalizer.from_dict(json.loads(json.dumps(norm.to_dict())))
    probe = rng.standard_normal((20, 9))
    assert np.array_equal(apply_normalizer(norm, probe), apply_normalizer(restored, probe))
