"""Classification and regression metrics: confusion matrix, Dice, RMSE.

Dice generalizes to K classes one-vs-rest per class; the macro score is the
unweighted mean over classes where Dice is defined. A class with zero true
and zero predicted instances has no Dice value and is excluded from the
macro average.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .scene import ValidationError

__all__ = [
    "ConfusionMatrix",
    "confusion_matrix",
    "dice_scores",
    "rmse",
    "EvalReport",
    "evaluate_classification",
    "evaluate_regression",
]


@dataclass
class ConfusionMatrix:
    """Counts[t][p]: rows are true classes, columns predicted classes."""

    labels: list[str]
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "counts": self.counts.tolist()}


def confusion_matrix(
    truth: Sequence, pred: Sequence, labels: Sequence[str]
) -> ConfusionMatrix:
    """Count prediction outcomes over a declared, ordered class set.

    Raises
    ------
    ValidationError
        Length mismatch, empty input, or a label outside the class set.
    """
    truth = [str(t) for t in truth]
    pred = [str(p) for p in pred]
    if len(truth) != len(pred):
        raise ValidationError(
            f"truth and prediction lengths differ: {len(truth)} vs {len(pred)}"
        )
    if not truth:
        raise ValidationError("cannot build a confusion matrix from empty input")
    labels = [str(l) for l in labels]
    index = {l: i for i, l in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in zip(truth, pred):
        if t not in index:
            raise ValidationError(f"unknown true label {t!r}")
        if p not in index:
            raise ValidationError(f"unknown predicted label {p!r}")
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(labels=labels, counts=counts)


def dice_scores(cm: ConfusionMatrix) -> tuple[dict[str, Optional[float]], float]:
    """Per-class one-vs-rest Dice and the unweighted macro mean.

    Dice_c = 2 TP / (2 TP + FP + FN). Classes with no true and no
    predicted instances report None and do not weigh in the macro score.
    """
    per_class: dict[str, Optional[float]] = {}
    defined: list[float] = []
    row = cm.row_sums()
    col = cm.col_sums()
    for i, label in enumerate(cm.labels):
        tp = float(cm.counts[i, i])
        fn = float(row[i]) - tp
        fp = float(col[i]) - tp
        denom = 2.0 * tp + fp + fn
        if denom == 0.0:
            per_class[label] = None
            continue
        score = 2.0 * tp / denom
        per_class[label] = score
        defined.append(score)
    if not defined:
        raise ValidationError("Dice undefined for every class")
    return per_class, float(np.mean(defined))


def rmse(truth: Sequence[float], est: Sequence[float]) -> float:
    """Root-mean-square error between paired sequences."""
    truth = np.asarray(truth, dtype=float)
    est = np.asarray(est, dtype=float)
    if truth.shape != est.shape:
        raise ValidationError(
            f"truth and estimate lengths differ: {truth.shape} vs {est.shape}"
        )
    if truth.size == 0:
        raise ValidationError("rmse of empty input")
    return float(np.sqrt(np.mean((truth - est) ** 2)))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------
@dataclass
class EvalReport:
    """Bundled evaluation products for one model on one trace set."""

    confusion: Optional[ConfusionMatrix] = None
    dice: dict[str, Optional[float]] = field(default_factory=dict)
    macro_dice: Optional[float] = None
    accuracy: Optional[float] = None
    precision: dict[str, Optional[float]] = field(default_factory=dict)
    recall: dict[str, Optional[float]] = field(default_factory=dict)
    rmse: Optional[float] = None
    n_evaluated: int = 0

    def to_text(self) -> str:
        lines = [f"evaluated traces: {self.n_evaluated}"]
        if self.confusion is not None:
            cm = self.confusion
            width = max(12, max(len(l) for l in cm.labels) + 2)
            header = "true \\ pred".ljust(width) + "".join(l.rjust(width) for l in cm.labels)
            lines += ["", "confusion matrix (rows true, columns predicted):", header]
            for i, l in enumerate(cm.labels):
                lines.append(l.ljust(width) + "".join(str(int(c)).rjust(width) for c in cm.counts[i]))
            lines += ["", f"{'class':<{width}}{'dice':>10}{'precision':>12}{'recall':>10}"]
            for l in cm.labels:
                lines.append(
                    f"{l:<{width}}"
                    f"{_fmt(self.dice.get(l)):>10}"
                    f"{_fmt(self.precision.get(l)):>12}"
                    f"{_fmt(self.recall.get(l)):>10}"
                )
            lines.append("")
            lines.append(f"macro dice: {_fmt(self.macro_dice)}")
            lines.append(f"accuracy:   {_fmt(self.accuracy)}")
        if self.rmse is not None:
            lines.append(f"rmse [g/m^2]: {self.rmse:.6f}")
        return "\n".join(lines) + "\n"

    def to_kv(self) -> str:
        """Machine-readable key=value lines with fixed float formatting."""
        pairs: list[tuple[str, str]] = [("n_evaluated", str(self.n_evaluated))]
        if self.confusion is not None:
            cm = self.confusion
            pairs.append(("labels", ",".join(cm.labels)))
            for i, lt in enumerate(cm.labels):
                for j, lp in enumerate(cm.labels):
                    pairs.append((f"count.{lt}.{lp}", str(int(cm.counts[i, j]))))
            for l in cm.labels:
                pairs.append((f"dice.{l}", _fmt(self.dice.get(l))))
                pairs.append((f"precision.{l}", _fmt(self.precision.get(l))))
                pairs.append((f"recall.{l}", _fmt(self.recall.get(l))))
            pairs.append(("macro_dice", _fmt(self.macro_dice)))
            pairs.append(("accuracy", _fmt(self.accuracy)))
        if self.rmse is not None:
            pairs.append(("rmse", f"{self.rmse:.6f}"))
        return "".join(f"{k} = {v}\n" for k, v in pairs)


def _fmt(v: Optional[float]) -> str:
    return "nodata" if v is None else f"{v:.6f}"


def evaluate_classification(truth: Sequence, pred: Sequence, labels: Sequence[str]) -> EvalReport:
    cm = confusion_matrix(truth, pred, labels)
    dice, macro = dice_scores(cm)
    precision: dict[str, Optional[float]] = {}
    recall: dict[str, Optional[float]] = {}
    row = cm.row_sums()
    col = cm.col_sums()
    for i, l in enumerate(cm.labels):
        tp = float(cm.counts[i, i])
        precision[l] = tp / col[i] if col[i] > 0 else None
        recall[l] = tp / row[i] if row[i] > 0 else None
    accuracy = float(np.trace(cm.counts) / cm.total)
    return EvalReport(
        confusion=cm,
        dice=dice,
        macro_dice=macro,
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        n_evaluated=cm.total,
    )


def evaluate_regression(truth: Sequence[float], est: Sequence[float]) -> EvalReport:
    return EvalReport(rmse=rmse(truth, est), n_evaluated=len(np.asarray(truth)))
