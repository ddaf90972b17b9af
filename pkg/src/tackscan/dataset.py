"""On-disk dataset formats and ingestion.

Trace table: CSV with header ``x,y,quantity,s0,...,s{N-1}``, one row per
A-scan, samples as decimal text. The quantity column may be empty for
prediction-only data. A sidecar metadata file (dotted key = value lines)
carries dt, pulse and acquisition keys, and scene geometry. Feature sets
persist as ``x,y,label,f0,...,f{D-1}``.

All numeric text uses fixed formats so identical data yields identical
bytes.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from .forward import Survey
from .scene import PavementScene, ValidationError

__all__ = [
    "TraceDataset",
    "DatasetManifest",
    "FeatureDataset",
    "write_survey",
    "read_trace_table",
    "write_metadata",
    "read_metadata",
    "ingest",
    "write_features",
    "read_features",
    "file_checksum",
]

logger = logging.getLogger(__name__)

POSITION_FMT = "%.4f"
QUANTITY_FMT = "%.6g"
SAMPLE_FMT = "%.8e"
FEATURE_FMT = "%.12e"


@dataclass
class TraceDataset:
    """In-memory trace table plus its acquisition metadata."""

    x: np.ndarray
    y: np.ndarray
    quantity: Optional[np.ndarray]  # None for prediction-only data
    samples: np.ndarray
    metadata: dict[str, str]

    @property
    def n_traces(self) -> int:
        return self.samples.shape[0]

    @property
    def dt(self) -> float:
        return float(self.metadata["acquisition.dt"])

    @property
    def has_labels(self) -> bool:
        return self.quantity is not None


@dataclass
class DatasetManifest:
    """Validated pointer to a trace table and its sidecar."""

    trace_table: str
    metadata: str
    checksum: str
    provenance: str  # "simulated" | "ingested"
    n_traces: int
    has_labels: bool

    def to_dict(self) -> dict:
        return {
            "trace_table": self.trace_table,
            "metadata": self.metadata,
            "checksum": self.checksum,
            "provenance": self.provenance,
            "n_traces": self.n_traces,
            "has_labels": self.has_labels,
        }

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "DatasetManifest":
        d = json.loads(Path(path).read_text())
        return cls(**d)


def file_checksum(path: Union[str, Path]) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Metadata sidecar
# ---------------------------------------------------------------------------
def write_metadata(path: Union[str, Path], meta: dict[str, str]) -> None:
    lines = [f"{k} = {meta[k]}" for k in sorted(meta)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_metadata(path: Union[str, Path]) -> dict[str, str]:
    meta: dict[str, str] = {}
    for ln, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{ln}: expected 'key = value'")
        key, value = line.split("=", 1)
        meta[key.strip()] = value.strip()
    return meta


def survey_metadata(survey: Survey, scene: Optional[PavementScene] = None) -> dict[str, str]:
    acq = survey.acquisition
    pulse = survey.pulse
    meta = {
        "acquisition.dt": repr(survey.dt),
        "acquisition.time_window": repr(acq.time_window),
        "acquisition.samples_per_trace": str(acq.samples_per_trace),
        "acquisition.traces_per_meter": repr(acq.traces_per_meter),
        "acquisition.noise_snr_db": "" if acq.noise_snr_db is None else repr(acq.noise_snr_db),
        "acquisition.seed": str(acq.seed),
        "acquisition.coupling_amplitude": repr(acq.coupling_amplitude),
        "pulse.center_frequency": repr(pulse.center_frequency),
        "pulse.kind": pulse.kind,
        "pulse.amplitude": repr(pulse.amplitude),
        "profiles": ";".join(survey.profile_names),
    }
    if scene is not None:
        meta.update(
            {
                "scene.length": repr(scene.length),
                "scene.width": repr(scene.width),
                "scene.step": repr(scene.step),
                "scene.scheme": scene.scheme.kind,
                "scene.boundaries": ",".join(repr(b) for b in scene.section_boundaries()),
            }
        )
        if scene.scheme.quantities:
            meta["scene.quantity_labels"] = ",".join(repr(q) for q in scene.scheme.quantities)
    return meta


# ---------------------------------------------------------------------------
# Trace tables
# ---------------------------------------------------------------------------
def write_survey(
    survey: Survey,
    trace_path: Union[str, Path],
    metadata_path: Union[str, Path],
    scene: Optional[PavementScene] = None,
) -> DatasetManifest:
    """Write trace table + sidecar, returning a manifest for the pair."""
    n, ns = survey.samples.shape
    cols = {"x": survey.x, "y": survey.y, "quantity": survey.quantity}
    frame = pd.DataFrame(cols)
    sample_frame = pd.DataFrame(survey.samples, columns=[f"s{i}" for i in range(ns)])
    frame = pd.concat([frame, sample_frame], axis=1)
    with open(trace_path, "w", newline="") as fh:
        fh.write(",".join(frame.columns) + "\n")
        np.savetxt(
            fh,
            frame.to_numpy(),
            delimiter=",",
            fmt=[POSITION_FMT, POSITION_FMT, QUANTITY_FMT] + [SAMPLE_FMT] * ns,
        )
    write_metadata(metadata_path, survey_metadata(survey, scene))
    return DatasetManifest(
        trace_table=str(trace_path),
        metadata=str(metadata_path),
        checksum=file_checksum(trace_path),
        provenance="simulated",
        n_traces=n,
        has_labels=True,
    )


def read_trace_table(
    trace_path: Union[str, Path], metadata_path: Union[str, Path]
) -> TraceDataset:
    """Load a trace table and its sidecar, validating structure.

    Raises
    ------
    ValidationError
        Ragged rows, non-numeric samples, missing columns, or missing dt.
    """
    meta = read_metadata(metadata_path)
    if "acquisition.dt" not in meta:
        raise ValidationError(f"{metadata_path}: missing required key acquisition.dt")
    header = pd.read_csv(trace_path, nrows=0)
    columns = list(header.columns)
    if columns[:3] == ["x", "y", "quantity"]:
        quantity_present = True
        lead = 3
    elif columns[:2] == ["x", "y"]:
        # Label column absent entirely: a prediction-only table.
        quantity_present = False
        lead = 2
    else:
        raise ValidationError(
            f"{trace_path}: header must start with x,y[,quantity], got {columns[:3]}"
        )
    n_samples = len(columns) - lead
    expected = [f"s{i}" for i in range(n_samples)]
    if columns[lead:] != expected:
        raise ValidationError(f"{trace_path}: sample columns must be s0..s{n_samples - 1}")

    # Structural checks run on the raw text so errors name the row.
    with open(trace_path) as fh:
        next(fh)
        for row_idx, line in enumerate(fh):
            n_fields = line.count(",") + 1
            if n_fields != len(columns):
                raise ValidationError(
                    f"{trace_path}: ragged row {row_idx}: {n_fields} fields, "
                    f"expected {len(columns)}"
                )

    frame = pd.read_csv(trace_path)
    if quantity_present:
        quantity_col = frame["quantity"]
        has_labels = not quantity_col.isna().all()
        if has_labels and quantity_col.isna().any():
            raise ValidationError(f"{trace_path}: quantity column is partially empty")
    else:
        quantity_col = None
        has_labels = False
    sample_block = frame[columns[lead:]].to_numpy()
    if not np.issubdtype(sample_block.dtype, np.number):
        raise ValidationError(f"{trace_path}: non-numeric sample values")
    if not np.all(np.isfinite(sample_block)):
        raise ValidationError(f"{trace_path}: non-finite sample values")
    return TraceDataset(
        x=frame["x"].to_numpy(dtype=float),
        y=frame["y"].to_numpy(dtype=float),
        quantity=quantity_col.to_numpy(dtype=float) if has_labels else None,
        samples=sample_block.astype(float),
        metadata=meta,
    )


def trace_dataset_from_survey(survey: Survey, scene: Optional[PavementScene] = None) -> TraceDataset:
    """In-memory view of a survey in the on-disk dataset schema."""
    return TraceDataset(
        x=survey.x.copy(),
        y=survey.y.copy(),
        quantity=survey.quantity.copy(),
        samples=survey.samples,
        metadata=survey_metadata(survey, scene),
    )


def ingest(
    trace_path: Union[str, Path], metadata_path: Union[str, Path]
) -> DatasetManifest:
    """Validate an externally produced trace table and build its manifest."""
    ds = read_trace_table(trace_path, metadata_path)
    manifest = DatasetManifest(
        trace_table=str(trace_path),
        metadata=str(metadata_path),
        checksum=file_checksum(trace_path),
        provenance="ingested",
        n_traces=ds.n_traces,
        has_labels=ds.has_labels,
    )
    logger.info(
        "ingested %d traces (%s)", ds.n_traces, "labeled" if ds.has_labels else "prediction-only"
    )
    return manifest


def load_manifest_dataset(manifest: DatasetManifest) -> TraceDataset:
    """Load the dataset behind a manifest, enforcing its checksum."""
    actual = file_checksum(manifest.trace_table)
    if actual != manifest.checksum:
        raise ValidationError(
            f"{manifest.trace_table}: checksum mismatch (file changed since manifest)"
        )
    return read_trace_table(manifest.trace_table, manifest.metadata)


# ---------------------------------------------------------------------------
# Feature datasets
# ---------------------------------------------------------------------------
@dataclass
class FeatureDataset:
    x: np.ndarray
    y: np.ndarray
    label: Optional[np.ndarray]  # truth quantity [g/m^2] or None
    features: np.ndarray

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def write_features(ds: FeatureDataset, path: Union[str, Path]) -> None:
    d = ds.features.shape[1]
    header = "x,y,label," + ",".join(f"f{i}" for i in range(d))
    label = ds.label if ds.label is not None else np.full(ds.n, np.nan)
    block = np.column_stack([ds.x, ds.y, label, ds.features])
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        np.savetxt(
            fh,
            block,
            delimiter=",",
            fmt=[POSITION_FMT, POSITION_FMT, QUANTITY_FMT] + [FEATURE_FMT] * d,
        )


def read_features(path: Union[str, Path]) -> FeatureDataset:
    frame = pd.read_csv(path)
    cols = list(frame.columns)
    if cols[:3] != ["x", "y", "label"]:
        raise ValidationError(f"{path}: feature header must start with x,y,label")
    label_col = frame["label"]
    has_labels = not label_col.isna().all()
    return FeatureDataset(
        x=frame["x"].to_numpy(dtype=float),
        y=frame["y"].to_numpy(dtype=float),
        label=label_col.to_numpy(dtype=float) if has_labels else None,
        features=frame[cols[3:]].to_numpy(dtype=float),
    )
