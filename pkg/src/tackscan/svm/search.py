"""Cross-validated hyperparameter grid search.

Classification uses stratified k-fold, regression plain k-fold; both derive
fold assignments deterministically from a seed. The winning cell maximizes
the mean validation metric; exact ties resolve to the smallest C, then the
smallest gamma, then the smallest epsilon.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..metrics import confusion_matrix, dice_scores, rmse
from ..scene import ValidationError
from .kernels import KernelSpec
from .models import (
    predict_binary,
    predict_multiclass,
    predict_svr,
    train_binary,
    train_multiclass,
    train_svr,
)
from .solver import ConvergenceError

__all__ = ["GridCell", "GridSearchResult", "kfold_indices", "stratified_kfold_indices", "grid_search_cv"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridCell:
    C: float
    gamma: float = 1.0
    epsilon: float = 0.0

    def kernel(self, kind: str, degree: int = 3, coef0: float = 0.0) -> KernelSpec:
        return KernelSpec(kind=kind, gamma=self.gamma, degree=degree, coef0=coef0)

    def sort_key(self) -> tuple[float, float, float]:
        return (self.C, self.gamma, self.epsilon)


@dataclass
class GridSearchResult:
    best: GridCell
    best_score: float
    table: list[tuple[GridCell, list[float], float]]  # cell, fold scores, mean

    def log_lines(self) -> list[str]:
        lines = []
        for cell, folds, mean in self.table:
            fold_txt = ",".join(f"{v:.6f}" for v in folds)
            lines.append(
                f"C={cell.C:g} gamma={cell.gamma:g} epsilon={cell.epsilon:g} "
                f"folds=[{fold_txt}] mean={mean:.6f}"
            )
        lines.append(
            f"best: C={self.best.C:g} gamma={self.best.gamma:g} "
            f"epsilon={self.best.epsilon:g} score={self.best_score:.6f}"
        )
        return lines


def kfold_indices(n: int, folds: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Plain k-fold over shuffled indices; deterministic from seed."""
    if folds < 2:
        raise ValidationError("cross-validation needs >= 2 folds")
    if folds > n:
        raise ValidationError(f"{folds} folds infeasible with {n} examples")
    order = np.random.default_rng(seed).permutation(n)
    assignment = np.empty(n, dtype=int)
    assignment[order] = np.arange(n) % folds
    return _folds_from_assignment(assignment, folds)


def stratified_kfold_indices(
    labels: Sequence, folds: int, seed: int
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Stratified k-fold: each class dealt round-robin after a seeded shuffle.

    Raises
    ------
    ValidationError
        When any class has fewer examples than folds.
    """
    labels = np.asarray(labels, dtype=object)
    if folds < 2:
        raise ValidationError("cross-validation needs >= 2 folds")
    assignment = np.empty(labels.size, dtype=int)
    classes = sorted(set(labels.tolist()), key=str)
    for ci, c in enumerate(classes):
        idx = np.flatnonzero(labels == c)
        if idx.size < folds:
            raise ValidationError(
                f"infeasible stratification: class {c!r} has {idx.size} examples "
                f"for {folds} folds"
            )
        idx = idx[np.random.default_rng((seed, ci)).permutation(idx.size)]
        assignment[idx] = np.arange(idx.size) % folds
    return _folds_from_assignment(assignment, folds)


def _folds_from_assignment(assignment: np.ndarray, folds: int) -> list[tuple[np.ndarray, np.ndarray]]:
    out = []
    for f in range(folds):
        val = np.flatnonzero(assignment == f)
        train = np.flatnonzero(assignment != f)
        out.append((train, val))
    return out


def _macro_dice(truth, pred, label_order) -> float:
    cm = confusion_matrix(truth, pred, label_order)
    return dice_scores(cm)[1]


def grid_search_cv(
    x: np.ndarray,
    y: np.ndarray,
    task: str,
    grid_c: Sequence[float],
    grid_gamma: Sequence[float],
    folds: int,
    seed: int,
    kernel_kind: str = "rbf",
    grid_epsilon: Sequence[float] = (0.0,),
    class_order: Optional[Sequence[str]] = None,
    metric: Optional[str] = None,
    tol: float = 1e-3,
    max_iter: int = 1_000_000,
) -> GridSearchResult:
    """Exhaustive CV over (C, gamma[, epsilon]).

    task: "binary" (y in {-1,+1}), "multiclass" (string labels with
    class_order), or "svr" (real targets). The validation metric defaults
    to macro Dice for classification and negative RMSE for regression.
    """
    x = np.asarray(x, dtype=float)
    if task not in ("binary", "multiclass", "svr"):
        raise ValidationError(f"unknown task {task!r}")
    if metric is None:
        metric = "neg_rmse" if task == "svr" else "macro_dice"
    if task == "svr" and metric == "macro_dice":
        raise ValidationError("macro_dice is undefined for regression")
    if task == "svr":
        splits = kfold_indices(x.shape[0], folds, seed)
        y = np.asarray(y, dtype=float)
    else:
        strat_labels = y if task == "multiclass" else np.asarray(
            ["pos" if v > 0 else "neg" for v in y], dtype=object
        )
        splits = stratified_kfold_indices(strat_labels, folds, seed)

    if task == "binary":
        label_order = ["-1.0", "1.0"]
    elif task == "multiclass":
        label_order = list(class_order) if class_order is not None else sorted(set(np.asarray(y, dtype=object).tolist()), key=str)

    cells = [
        GridCell(C=c, gamma=g, epsilon=e)
        for c, g, e in itertools.product(grid_c, grid_gamma, grid_epsilon)
    ]
    table: list[tuple[GridCell, list[float], float]] = []
    for cell in cells:
        kernel = cell.kernel(kernel_kind)
        scores: list[float] = []
        try:
            _score_cell(
                cell, kernel, splits, x, y, task, label_order if task != "svr" else None,
                metric, tol, max_iter, scores,
            )
        except ConvergenceError as exc:
            # A pathological cell must not sink the whole search.
            logger.warning(
                "grid cell C=%g gamma=%g epsilon=%g did not converge (%s); excluded",
                cell.C, cell.gamma, cell.epsilon, exc,
            )
            scores = [-np.inf] * len(splits)
        table.append((cell, scores, float(np.mean(scores))))

    best_mean = max(mean for _, _, mean in table)
    if not np.isfinite(best_mean):
        raise ConvergenceError(max_iter, float("nan"), tol)
    winners = [cell for cell, _, mean in table if mean == best_mean]
    best = min(winners, key=GridCell.sort_key)
    logger.info("grid search: %d cells, best score %.6f", len(cells), best_mean)
    return GridSearchResult(best=best, best_score=best_mean, table=table)


def _score_cell(cell, kernel, splits, x, y, task, label_order, metric, tol, max_iter, scores):
    for train_idx, val_idx in splits:
        if task == "binary":
            model = train_binary(x[train_idx], y[train_idx], cell.C, kernel, tol=tol, max_iter=max_iter)
            pred, _ = predict_binary(model, x[val_idx])
        elif task == "multiclass":
            model = train_multiclass(x[train_idx], y[train_idx], label_order, cell.C, kernel, tol=tol, max_iter=max_iter)
            pred, _, _ = predict_multiclass(model, x[val_idx])
        else:
            model = train_svr(x[train_idx], y[train_idx], cell.C, cell.epsilon, kernel, tol=tol, max_iter=max_iter)
            pred = predict_svr(model, x[val_idx])
        truth = y[val_idx]

        if metric == "macro_dice":
            scores.append(_macro_dice(truth, pred, label_order))
        elif metric == "accuracy":
            scores.append(float(np.mean(np.asarray(pred, dtype=object) == np.asarray(truth, dtype=object))))
        elif metric == "neg_rmse":
            scores.append(-rmse(truth, pred))
        else:
            raise ValidationError(f"unknown metric {metric!r}")
