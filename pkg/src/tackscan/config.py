"""Run configuration: flat ``dotted.key = value`` text with a closed schema.

Unknown keys are hard errors; every value is typed at parse time. A single
top-level ``seed`` feeds every stage seed that is not set explicitly, so
one number pins an entire run.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Union

from .features import FeatureConfig
from .forward import AcquisitionSpec, Profile, PulseSpec
from .scene import (
    BINARY_SCHEME,
    FOUR_CLASS_SCHEME,
    Layer,
    SceneSpec,
    Section,
    TackCoatRule,
    ThicknessFieldSpec,
    ValidationError,
    quantity_label_scheme,
    scene_preset,
)

__all__ = ["ConfigError", "parse_config_text", "load_config_file", "RunConfig"]


class ConfigError(ValidationError):
    """Malformed config text or value."""


# ---------------------------------------------------------------------------
# Schema: key -> (parser, default-as-text). None default means "unset".
# ---------------------------------------------------------------------------
def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip() != ""]


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip() != ""]


def _opt_float(text: str) -> Optional[float]:
    return None if text.strip() == "" else float(text)


SCHEMA: dict[str, tuple[Callable, Optional[str]]] = {
    "seed": (int, "0"),
    # -- scene ---------------------------------------------------------
    "scene.preset": (str, None),
    "scene.length": (float, None),
    "scene.width": (float, None),
    "scene.step": (float, "0.25"),
    "scene.sections": (str, None),  # name:length:quantity[:wearing];...
    "scene.scheme": (str, "four_class"),
    "scene.quantity_labels": (_float_list, None),
    "scene.quantity_floor": (float, "0"),
    "scene.thickness.mode": (str, None),
    "scene.thickness.mean_x": (float, "0"),
    "scene.thickness.mean_y": (float, "0"),
    "scene.thickness.cov_xx": (float, "1"),
    "scene.thickness.cov_xy": (float, "0"),
    "scene.thickness.cov_yy": (float, "1"),
    "scene.thickness.d_min": (float, "0"),
    "scene.thickness.d_max": (float, "0"),
    "scene.thickness.seed": (int, "0"),
    "scene.wearing.thickness": (float, "0.05"),
    "scene.wearing.permittivity": (float, "5.0"),
    "scene.wearing.conductivity": (float, "0.005"),
    "scene.binder.thickness": (float, "0.07"),
    "scene.binder.permittivity": (float, "7.0"),
    "scene.binder.conductivity": (float, "0.01"),
    "scene.subgrade.permittivity": (float, "9.0"),
    "scene.subgrade.conductivity": (float, "0.02"),
    "scene.tack.film_per_unit": (float, "1e-6"),
    "scene.tack.eps_base": (float, "6.0"),
    "scene.tack.eps_slope": (float, "0.01"),
    "scene.tack.conductivity": (float, "0.01"),
    # -- source & acquisition -------------------------------------------
    "pulse.center_frequency": (float, "2.6e9"),
    "pulse.kind": (str, "ricker"),
    "pulse.amplitude": (float, "1.0"),
    "acquisition.time_window": (float, "20e-9"),
    "acquisition.samples_per_trace": (int, "2048"),
    "acquisition.traces_per_meter": (float, "50"),
    "acquisition.noise_snr_db": (_opt_float, ""),
    "acquisition.seed": (int, None),
    "acquisition.coupling_amplitude": (float, "0"),
    # -- survey geometry -------------------------------------------------
    "survey.mode": (str, "grid"),  # grid | profiles
    "survey.profiles": (str, None),  # name:axis:offset;...
    # -- features ---------------------------------------------------------
    "features.gate": (str, "auto"),  # auto | t0:t1 (seconds)
    "features.gate_offset": (float, "1.25e-9"),
    "features.gate_duration": (float, "3e-9"),
    "features.window_count": (int, "8"),
    "features.include": (_str_list, (
        "window_energy,window_peak_amplitude,peak_time,"
        "spectral_centroid,spectral_band_energies"
    )),
    "features.raw_count": (int, "32"),
    # -- svm --------------------------------------------------------------
    "svm.task": (str, "tcsvm"),  # tcsvm | mcsvm | svr
    "svm.kernel": (str, "rbf"),
    "svm.degree": (int, "3"),
    "svm.coef0": (float, "0.0"),
    "svm.tol": (float, "1e-3"),
    "svm.max_iter": (int, "1000000"),
    # gamma = scale / feature_dimension
    "svm.grid_c": (_float_list, "0.125,0.25,0.5,1,2,4,8,16,32,64,128"),
    "svm.grid_gamma_scale": (_float_list, "0.0078125,0.015625,0.03125,0.0625,0.125,0.25,0.5,1,2,4,8"),
    "svm.grid_epsilon": (_float_list, "1,5,10,25"),
    "svm.folds": (int, "3"),
    "svm.cv_max_train": (int, "0"),  # 0 = no cap
    "svm.max_train": (int, "0"),  # 0 = no cap
    "search.seed": (int, None),
    "search.metric": (str, ""),  # empty = task default
    # -- split & evaluation ------------------------------------------------
    "split.mode": (str, "random"),  # random | spatial_block
    "split.train_fraction": (float, "0.7"),
    "split.seed": (int, None),
    "split.block_length": (float, "5.0"),
    "eval.exclusion_margin": (float, "0"),
}


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse dotted-key lines into a raw string map; unknown keys fail."""
    raw: dict[str, str] = {}
    for ln, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{ln}: expected 'key = value', got {stripped!r}")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{ln}: unknown config key {key!r}")
        raw[key] = value.strip()
    return raw


def load_config_file(path: Union[str, Path]) -> dict[str, str]:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    return parse_config_text(p.read_text(), source=str(p))


class RunConfig:
    """Typed access over merged raw config maps."""

    def __init__(self, *raw_maps: dict[str, str]):
        merged: dict[str, str] = {}
        for m in raw_maps:
            for k in m:
                if k not in SCHEMA:
                    raise ConfigError(f"unknown config key {k!r}")
            merged.update(m)
        self.raw = merged

    def get(self, key: str):
        parser, default = SCHEMA[key]
        if key in self.raw:
            text = self.raw[key]
        elif default is not None:
            text = default
        else:
            return None
        try:
            return parser(text)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config key {key!r}: bad value {text!r} ({exc})") from None

    def set(self, key: str, value: str) -> None:
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        self.raw[key] = value

    # -- derived seeds ----------------------------------------------------
    def seed_for(self, key: str) -> int:
        explicit = self.get(key)
        return int(explicit) if explicit is not None else int(self.get("seed"))

    # -- builders ----------------------------------------------------------
    def scene_spec(self) -> SceneSpec:
        preset = self.get("scene.preset")
        if preset is not None:
            return scene_preset(preset)
        length = self.get("scene.length")
        width = self.get("scene.width")
        if length is None or width is None:
            raise ConfigError("scene needs scene.preset or scene.length + scene.width")

        base = (
            Layer("wearing_course", self.get("scene.wearing.thickness"),
                  self.get("scene.wearing.permittivity"), self.get("scene.wearing.conductivity")),
            Layer("binder_course", self.get("scene.binder.thickness"),
                  self.get("scene.binder.permittivity"), self.get("scene.binder.conductivity")),
            Layer("subgrade", 0.0, self.get("scene.subgrade.permittivity"),
                  self.get("scene.subgrade.conductivity"), half_space=True),
        )
        rule = TackCoatRule(
            film_per_unit=self.get("scene.tack.film_per_unit"),
            eps_base=self.get("scene.tack.eps_base"),
            eps_slope=self.get("scene.tack.eps_slope"),
            conductivity=self.get("scene.tack.conductivity"),
        )
        scheme_name = self.get("scene.scheme")
        if scheme_name == "binary":
            scheme = BINARY_SCHEME
        elif scheme_name == "four_class":
            scheme = FOUR_CLASS_SCHEME
        elif scheme_name == "quantity_labels":
            labels = self.get("scene.quantity_labels")
            if not labels:
                raise ConfigError("scene.scheme=quantity_labels needs scene.quantity_labels")
            scheme = quantity_label_scheme(labels)
        else:
            raise ConfigError(f"unknown scene.scheme {scheme_name!r}")

        sections_text = self.get("scene.sections")
        mode = self.get("scene.thickness.mode")
        sections: tuple[Section, ...] = ()
        fieldspec = None
        if sections_text:
            if not sections_text.strip():
                raise ConfigError("scene.sections is empty")
            sections = tuple(_parse_section(s) for s in sections_text.split(";") if s.strip())
            if not sections:
                raise ConfigError("scene.sections lists no sections")
        elif mode:
            fieldspec = ThicknessFieldSpec(
                mode=mode,
                mean_position=(self.get("scene.thickness.mean_x"), self.get("scene.thickness.mean_y")),
                covariance=(
                    (self.get("scene.thickness.cov_xx"), self.get("scene.thickness.cov_xy")),
                    (self.get("scene.thickness.cov_xy"), self.get("scene.thickness.cov_yy")),
                ),
                d_min=self.get("scene.thickness.d_min"),
                d_max=self.get("scene.thickness.d_max"),
                seed=self.get("scene.thickness.seed"),
            )
        else:
            raise ConfigError("scene needs scene.sections or scene.thickness.mode")
        return SceneSpec(
            length=length,
            width=width,
            step=self.get("scene.step"),
            base_stack=base,
            scheme=scheme,
            tack_rule=rule,
            sections=sections,
            thickness_field=fieldspec,
            quantity_floor=self.get("scene.quantity_floor"),
        )

    def pulse(self) -> PulseSpec:
        return PulseSpec(
            center_frequency=self.get("pulse.center_frequency"),
            kind=self.get("pulse.kind"),
            amplitude=self.get("pulse.amplitude"),
        )

    def acquisition(self) -> AcquisitionSpec:
        return AcquisitionSpec(
            time_window=self.get("acquisition.time_window"),
            samples_per_trace=self.get("acquisition.samples_per_trace"),
            traces_per_meter=self.get("acquisition.traces_per_meter"),
            noise_snr_db=self.get("acquisition.noise_snr_db"),
            seed=self.seed_for("acquisition.seed"),
            coupling_amplitude=self.get("acquisition.coupling_amplitude"),
        )

    def profiles(self) -> Optional[list[Profile]]:
        mode = self.get("survey.mode")
        if mode == "grid":
            return None
        if mode != "profiles":
            raise ConfigError(f"unknown survey.mode {mode!r}")
        text = self.get("survey.profiles")
        if not text:
            raise ConfigError("survey.mode=profiles needs survey.profiles")
        out = []
        for part in text.split(";"):
            if not part.strip():
                continue
            bits = part.split(":")
            if len(bits) != 3:
                raise ConfigError(f"profile {part!r} must be name:axis:offset")
            out.append(Profile(bits[0].strip(), bits[1].strip(), float(bits[2])))
        if not out:
            raise ConfigError("survey.profiles lists no profiles")
        return out

    def feature_config(self) -> FeatureConfig:
        gate_text = self.get("features.gate")
        if gate_text == "auto":
            gate: Union[str, tuple[float, float]] = "auto"
        else:
            bits = gate_text.split(":")
            if len(bits) != 2:
                raise ConfigError(f"features.gate must be 'auto' or 't0:t1', got {gate_text!r}")
            gate = (float(bits[0]), float(bits[1]))
        return FeatureConfig(
            gate=gate,
            gate_offset=self.get("features.gate_offset"),
            gate_duration=self.get("features.gate_duration"),
            window_count=self.get("features.window_count"),
            include=tuple(self.get("features.include")),
            raw_count=self.get("features.raw_count"),
            band_center=self.get("pulse.center_frequency"),
        )

    def dump(self) -> str:
        """Effective configuration as config-format text (set keys only)."""
        return "".join(f"{k} = {self.raw[k]}\n" for k in sorted(self.raw))


def _parse_section(text: str) -> Section:
    bits = [b.strip() for b in text.split(":")]
    if len(bits) not in (3, 4):
        raise ConfigError(f"section {text!r} must be name:length:quantity[:wearing_thickness]")
    wearing = float(bits[3]) if len(bits) == 4 else None
    return Section(bits[0], float(bits[1]), float(bits[2]), wearing_thickness=wearing)
