"""A-scan feature extraction and column normalization.

The default feature set targets the thin-film interference signature of the
tack coat: energies and peak amplitudes over contiguous sub-windows of a
time gate around the interface echoes, the in-gate peak time, the spectral
centroid, and octave-band energies of the gated trace.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .forward import AScan, envelope
from .scene import ValidationError

__all__ = [
    "FeatureConfig",
    "NoArrivalError",
    "Normalizer",
    "gate_trace",
    "resolve_gate",
    "extract_features",
    "extract_feature_matrix",
    "feature_dimension",
    "feature_names",
    "fit_normalizer",
    "apply_normalizer",
]

FAMILIES = (
    "window_energy",
    "window_peak_amplitude",
    "peak_time",
    "spectral_centroid",
    "spectral_band_energies",
    "raw_decimated",
)

N_SPECTRAL_BANDS = 6


class NoArrivalError(ValueError):
    """Automatic gating found no arrival (all-zero or flat trace)."""


@dataclass(frozen=True)
class FeatureConfig:
    """Gate placement and feature family selection.

    gate: explicit (t_start, t_end) in seconds, or "auto" to center a
    window of gate_duration at the first-arrival envelope peak plus
    gate_offset. Feature dimension is a pure function of this config.
    """

    gate: Union[str, tuple[float, float]] = "auto"
    gate_offset: float = 1.25e-9
    gate_duration: float = 3.0e-9
    window_count: int = 8
    include: tuple[str, ...] = (
        "window_energy",
        "window_peak_amplitude",
        "peak_time",
        "spectral_centroid",
        "spectral_band_energies",
    )
    raw_count: int = 32
    band_center: float = 2.6e9

    def __post_init__(self):
        if self.window_count < 1:
            raise ValidationError("window_count must be >= 1")
        if not self.include:
            raise ValidationError("at least one feature family must be enabled")
        for fam in self.include:
            if fam not in FAMILIES:
                raise ValidationError(f"unknown feature family {fam!r}")
        if isinstance(self.gate, tuple):
            t0, t1 = self.gate
            if not t0 < t1:
                raise ValidationError(f"inverted gate bounds ({t0}, {t1})")


def feature_dimension(cfg: FeatureConfig) -> int:
    d = 0
    if "window_energy" in cfg.include:
        d += cfg.window_count
    if "window_peak_amplitude" in cfg.include:
        d += cfg.window_count
    if "peak_time" in cfg.include:
        d += 1
    if "spectral_centroid" in cfg.include:
        d += 1
    if "spectral_band_energies" in cfg.include:
        d += N_SPECTRAL_BANDS
    if "raw_decimated" in cfg.include:
        d += cfg.raw_count
    return d


def feature_names(cfg: FeatureConfig) -> list[str]:
    names: list[str] = []
    if "window_energy" in cfg.include:
        names += [f"win_energy_{i}" for i in range(cfg.window_count)]
    if "window_peak_amplitude" in cfg.include:
        names += [f"win_peak_{i}" for i in range(cfg.window_count)]
    if "peak_time" in cfg.include:
        names.append("peak_time")
    if "spectral_centroid" in cfg.include:
        names.append("spectral_centroid")
    if "spectral_band_energies" in cfg.include:
        names += [f"band_energy_{i}" for i in range(N_SPECTRAL_BANDS)]
    if "raw_decimated" in cfg.include:
        names += [f"raw_{i}" for i in range(cfg.raw_count)]
    return names


# ---------------------------------------------------------------------------
# Gating
# ---------------------------------------------------------------------------
def resolve_gate(ascan: AScan, cfg: FeatureConfig) -> tuple[int, int]:
    """Gate bounds as sample indices [lo, hi), clipped to the trace."""
    n = ascan.samples.size
    window = n * ascan.dt
    if cfg.gate == "auto":
        env = envelope(ascan.samples)
        peak = float(env.max())
        if peak <= 0.0:
            raise NoArrivalError("no-arrival: automatic gating on a zero trace")
        # First sample reaching half the global envelope peak, then the
        # local maximum it climbs to: the first-arrival envelope peak.
        first = int(np.argmax(env >= 0.5 * peak))
        i = first
        while i + 1 < n and env[i + 1] >= env[i]:
            i += 1
        center = i * ascan.dt + cfg.gate_offset
        t0 = center - 0.5 * cfg.gate_duration
        t1 = center + 0.5 * cfg.gate_duration
    else:
        t0, t1 = cfg.gate
        if not 0.0 <= t0 < t1 <= window + 1e-15:
            raise ValidationError(
                f"gate ({t0}, {t1}) outside trace window [0, {window:.3e}]"
            )
    lo = max(0, int(round(t0 / ascan.dt)))
    hi = min(n, int(round(t1 / ascan.dt)))
    if hi - lo < cfg.window_count:
        raise ValidationError("gate shorter than the sub-window count")
    return lo, hi


def gate_trace(ascan: AScan, gate: Union[str, tuple[float, float]], cfg: Optional[FeatureConfig] = None) -> np.ndarray:
    """Copy of the trace with samples outside the gate zeroed."""
    base = cfg if cfg is not None else FeatureConfig()
    use = FeatureConfig(
        gate=gate,
        gate_offset=base.gate_offset,
        gate_duration=base.gate_duration,
        window_count=1,
        include=base.include,
        raw_count=base.raw_count,
        band_center=base.band_center,
    )
    lo, hi = resolve_gate(ascan, use)
    out = np.zeros_like(ascan.samples)
    out[lo:hi] = ascan.samples[lo:hi]
    return out


# ---------------------------------------------------------------------------
# Extraction
# ---------------------------------------------------------------------------
def extract_features(ascan: AScan, cfg: FeatureConfig) -> np.ndarray:
    """Fixed-dimension feature vector for one trace.

    Raises on non-finite samples. Output length equals
    feature_dimension(cfg) for every trace.
    """
    if not np.all(np.isfinite(ascan.samples)):
        raise ValidationError("trace contains non-finite samples")
    lo, hi = resolve_gate(ascan, cfg)
    gated = ascan.samples[lo:hi]
    out: list[np.ndarray] = []

    if "window_energy" in cfg.include or "window_peak_amplitude" in cfg.include:
        bounds = np.linspace(0, gated.size, cfg.window_count + 1).astype(int)
        energies = np.empty(cfg.window_count)
        peaks = np.empty(cfg.window_count)
        for w in range(cfg.window_count):
            seg = gated[bounds[w] : bounds[w + 1]]
            energies[w] = float(np.sum(seg**2))
            peaks[w] = float(np.max(np.abs(seg))) if seg.size else 0.0
        if "window_energy" in cfg.include:
            out.append(energies)
        if "window_peak_amplitude" in cfg.include:
            out.append(peaks)

    if "peak_time" in cfg.include:
        if np.any(gated != 0.0):
            peak_idx = int(np.argmax(np.abs(gated)))
        else:
            peak_idx = 0
        out.append(np.array([(lo + peak_idx) * ascan.dt]))

    if "spectral_centroid" in cfg.include or "spectral_band_energies" in cfg.include:
        spec = np.abs(np.fft.rfft(gated)) ** 2
        freqs = np.fft.rfftfreq(gated.size, d=ascan.dt)
        total = float(spec.sum())
        if "spectral_centroid" in cfg.include:
            centroid = float((freqs * spec).sum() / total) if total > 0.0 else 0.0
            out.append(np.array([centroid]))
        if "spectral_band_energies" in cfg.include:
            # Octave bands around the antenna center frequency.
            edges = cfg.band_center * (2.0 ** np.arange(-3, N_SPECTRAL_BANDS - 2))
            bands = np.empty(N_SPECTRAL_BANDS)
            for b in range(N_SPECTRAL_BANDS):
                hi_edge = edges[b + 1] if b + 1 < edges.size else np.inf
                mask = (freqs >= edges[b]) & (freqs < hi_edge)
                bands[b] = float(spec[mask].sum())
            out.append(bands)

    if "raw_decimated" in cfg.include:
        idx = np.linspace(0, gated.size - 1, cfg.raw_count).astype(int)
        out.append(gated[idx])

    vec = np.concatenate(out)
    assert vec.size == feature_dimension(cfg)
    return vec


def extract_feature_matrix(survey_samples: np.ndarray, dt: float, cfg: FeatureConfig) -> np.ndarray:
    """Feature vectors for a stack of traces, one row per trace."""
    n = survey_samples.shape[0]
    mat = np.empty((n, feature_dimension(cfg)))
    for i in range(n):
        mat[i] = extract_features(AScan(survey_samples[i], dt, (0.0, 0.0)), cfg)
    return mat


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------
ZERO_VARIANCE_TOL = 1e-300


@dataclass(frozen=True)
class Normalizer:
    """Per-column z-score parameters fitted on a training set.

    Columns with zero variance are flagged and passed through unscaled.
    """

    mean: np.ndarray
    std: np.ndarray
    passthrough: np.ndarray  # bool per column

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "passthrough": [bool(v) for v in self.passthrough],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        return cls(
            mean=np.asarray(d["mean"], dtype=float),
            std=np.asarray(d["std"], dtype=float),
            passthrough=np.asarray(d["passthrough"], dtype=bool),
        )


def fit_normalizer(vectors: np.ndarray) -> Normalizer:
    """Fit column means/stds; requires >= 2 vectors."""
    vectors = np.asarray(vectors, dtype=float)
    if vectors.ndim != 2 or vectors.shape[0] < 2:
        raise ValidationError("normalizer needs a 2-D set of >= 2 vectors")
    mean = vectors.mean(axis=0)
    std = vectors.std(axis=0)
    passthrough = std <= ZERO_VARIANCE_TOL
    safe_std = np.where(passthrough, 1.0, std)
    return Normalizer(mean=mean, std=safe_std, passthrough=passthrough)


def apply_normalizer(norm: Normalizer, vectors: np.ndarray) -> np.ndarray:
    """Z-score vectors (a single vector or a matrix of rows)."""
    vectors = np.asarray(vectors, dtype=float)
    centered = np.where(norm.passthrough, vectors, vectors - norm.mean)
    return centered / norm.std
