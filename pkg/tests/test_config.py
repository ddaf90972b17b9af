"""Config parsing: schema enforcement, merging, builders."""

import pytest

from tackscan.config import ConfigError, RunConfig, parse_config_text
from tackscan.forward import Profile


def test_parse_basic_keys():
    raw = parse_config_text("seed = 42\nscene.preset = vendee\n# comment\n\n")
    assert raw == {"seed": "42", "scene.preset": "vendee"}


def test_unknown_key_is_hard_error_naming_the_key():
    with pytest.raises(ConfigError, match="scene.presett"):
        parse_config_text("scene.presett = vendee")


def test_malformed_line_rejected():
    with pytest.raises(ConfigError, match="expected 'key = value'"):
        parse_config_text("just some text")


def test_bad_value_reports_key():
    cfg = RunConfig({"acquisition.samples_per_trace": "many"})
    with pytest.raises(ConfigError, match="acquisition.samples_per_trace"):
        cfg.get("acquisition.samples_per_trace")


def test_later_maps_override_earlier():
    cfg = RunConfig({"seed": "1"}, {"seed": "2"})
    assert cfg.get("seed") == 2


def test_stage_seeds_derive_from_master():
    cfg = RunConfig({"seed": "7"})
    assert cfg.seed_for("acquisition.seed") == 7
    assert cfg.seed_for("split.seed") == 7
    cfg2 = RunConfig({"seed": "7", "split.seed": "99"})
    assert cfg2.seed_for("split.seed") == 99
    assert cfg2.seed_for("acquisition.seed") == 7


def test_scene_from_sections_config():
    cfg = RunConfig({
        "scene.length": "10",
        "scene.width": "2",
        "scene.step": "0.5",
        "scene.scheme": "binary",
        "scene.sections": "a:4:0;b:6:300:0.04",
    })
    spec = cfg.scene_spec()
    assert len(spec.sections) == 2
    assert spec.sections[1].wearing_thickness == 0.04
    assert spec.scheme.kind == "binary"


def test_scene_needs_quantity_source():
    cfg = RunConfig({"scene.length": "10", "scene.width": "2"})
    with pytest.raises(ConfigError, match="scene.sections or scene.thickness.mode"):
        cfg.scene_spec()


def test_quantity_labels_scheme_requires_labels():
    cfg = RunConfig({
        "scene.length": "10", "scene.width": "2",
        "scene.scheme": "quantity_labels",
        "scene.sections": "a:10:300",
    })
    with pytest.raises(ConfigError, match="quantity_labels"):
        cfg.scene_spec()


def test_profiles_parsing():
    cfg = RunConfig({
        "survey.mode": "profiles",
        "survey.profiles": "P1:x:1.2;P5:y:3.0",
    })
    profs = cfg.profiles()
    assert profs == [Profile("P1", "x", 1.2), Profile("P5", "y", 3.0)]


def test_grid_mode_has_no_profiles():
    assert RunConfig({}).profiles() is None


def test_bad_profile_spec():
    cfg = RunConfig({"survey.mode": "profiles", "survey.profiles": "P1:diagonal"})
    with pytest.raises(ConfigError, match="name:axis:offset"):
        cfg.profiles()


def test_feature_config_gate_forms():
    assert RunConfig({}).feature_config().gate == "auto"
    cfg = RunConfig({"features.gate": "0.3e-9:2.4e-9"})
    assert cfg.feature_config().gate == (0.3e-9, 2.4e-9)
    with pytest.raises(ConfigError, match="features.gate"):
        RunConfig({"features.gate": "bogus"}).feature_config()


def test_noise_empty_means_disabled():
    assert RunConfig({"acquisition.noise_snr_db": ""}).acquisition().noise_snr_db is None
    assert RunConfig({"acquisition.noise_snr_db": "20"}).acquisition().noise_snr_db == 20.0


def test_dump_is_reparsable():
    cfg = RunConfig({"seed": "3", "scene.preset": "carousel"})
    text = cfg.dump()
    again = RunConfig(parse_config_text(text))
    assert again.raw == cfg.raw
