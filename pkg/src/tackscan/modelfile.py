"""Self-describing model files.

A model file bundles everything prediction needs: the task, the feature
configuration, the fitted normalizer, the trained estimator(s), the label
scheme, and the training split record. JSON keeps the round-trip lossless:
floats serialize via their shortest exact decimal representation, so a
reloaded model reproduces predictions bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from .features import FeatureConfig, Normalizer
from .scene import ValidationError
from .svm.models import BinarySvmModel, MultiClassModel, SvrModel

__all__ = ["ModelBundle", "SplitRecord", "save_model", "load_model", "FORMAT_VERSION"]

FORMAT_VERSION = 1

TASKS = ("tcsvm", "mcsvm", "svr")


@dataclass
class SplitRecord:
    """Which dataset rows trained the model.

    checksum_kind records what dataset_checksum hashes: the trace table
    itself when known at training time, else the features file (in which
    case membership can only be re-applied by row count).
    """

    dataset_checksum: str
    checksum_kind: str  # "trace_table" | "features"
    mode: str
    train_fraction: float
    seed: int
    test_indices: list[int]

    def to_dict(self) -> dict:
        return {
            "dataset_checksum": self.dataset_checksum,
            "checksum_kind": self.checksum_kind,
            "mode": self.mode,
            "train_fraction": self.train_fraction,
            "seed": self.seed,
            "test_indices": self.test_indices,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplitRecord":
        return cls(
            dataset_checksum=d["dataset_checksum"],
            checksum_kind=d.get("checksum_kind", "features"),
            mode=d["mode"],
            train_fraction=float(d["train_fraction"]),
            seed=int(d["seed"]),
            test_indices=[int(i) for i in d["test_indices"]],
        )


@dataclass
class ModelBundle:
    task: str  # tcsvm | mcsvm | svr
    feature_config: FeatureConfig
    normalizer: Normalizer
    estimator: Union[BinarySvmModel, MultiClassModel, SvrModel]
    class_order: list[str]  # empty for svr
    scheme_kind: str  # binary | four_class | quantity_labels | none
    scheme_quantities: list[float]
    split: Optional[SplitRecord] = None

    def feature_dim(self) -> int:
        est = self.estimator
        if isinstance(est, MultiClassModel):
            return est.models[0].support_vectors.shape[1]
        return est.support_vectors.shape[1]


def _feature_config_dict(cfg: FeatureConfig) -> dict:
    gate = list(cfg.gate) if isinstance(cfg.gate, tuple) else cfg.gate
    return {
        "gate": gate,
        "gate_offset": cfg.gate_offset,
        "gate_duration": cfg.gate_duration,
        "window_count": cfg.window_count,
        "include": list(cfg.include),
        "raw_count": cfg.raw_count,
        "band_center": cfg.band_center,
    }


def _feature_config_from_dict(d: dict) -> FeatureConfig:
    gate = tuple(d["gate"]) if isinstance(d["gate"], list) else d["gate"]
    return FeatureConfig(
        gate=gate,
        gate_offset=float(d["gate_offset"]),
        gate_duration=float(d["gate_duration"]),
        window_count=int(d["window_count"]),
        include=tuple(d["include"]),
        raw_count=int(d["raw_count"]),
        band_center=float(d["band_center"]),
    )


def save_model(bundle: ModelBundle, path: Union[str, Path]) -> None:
    if bundle.task not in TASKS:
        raise ValidationError(f"unknown task {bundle.task!r}")
    payload = {
        "format_version": FORMAT_VERSION,
        "task": bundle.task,
        "feature_config": _feature_config_dict(bundle.feature_config),
        "normalizer": bundle.normalizer.to_dict(),
        "class_order": bundle.class_order,
        "scheme_kind": bundle.scheme_kind,
        "scheme_quantities": bundle.scheme_quantities,
        "estimator": bundle.estimator.to_dict(),
        "split": bundle.split.to_dict() if bundle.split is not None else None,
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")


def load_model(path: Union[str, Path]) -> ModelBundle:
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not a model file ({exc})") from None
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise ValidationError(f"{path}: unsupported model format version {version!r}")
    task = payload["task"]
    if task == "tcsvm":
        estimator: Union[BinarySvmModel, MultiClassModel, SvrModel] = BinarySvmModel.from_dict(
            payload["estimator"]
        )
    elif task == "mcsvm":
        estimator = MultiClassModel.from_dict(payload["estimator"])
    elif task == "svr":
        estimator = SvrModel.from_dict(payload["estimator"])
    else:
        raise ValidationError(f"{path}: unknown task {task!r}")
    split = payload.get("split")
    return ModelBundle(
        task=task,
        feature_config=_feature_config_from_dict(payload["feature_config"]),
        normalizer=Normalizer.from_dict(payload["normalizer"]),
        estimator=estimator,
        class_order=list(payload["class_order"]),
        scheme_kind=payload["scheme_kind"],
        scheme_quantities=[float(q) for q in payload["scheme_quantities"]],
        split=SplitRecord.from_dict(split) if split is not None else None,
    )
