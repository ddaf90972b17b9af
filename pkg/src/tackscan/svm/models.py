"""Support-vector models trained by SMO: binary, one-vs-one, regression."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..scene import ValidationError
from .kernels import KernelSpec, kernel_matrix
from .solver import smo_solve

__all__ = [
    "SolveDiagnostics",
    "BinarySvmModel",
    "MultiClassModel",
    "SvrModel",
    "train_binary",
    "predict_binary",
    "train_multiclass",
    "predict_multiclass",
    "train_svr",
    "predict_svr",
]

DEFAULT_TOL = 1e-3
DEFAULT_MAX_ITER = 1_000_000


@dataclass
class SolveDiagnostics:
    iterations: int
    kkt_gap: float
    dual_objective: float
    n_margin_violations: int = 0

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "kkt_gap": self.kkt_gap,
            "dual_objective": self.dual_objective,
            "n_margin_violations": self.n_margin_violations,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SolveDiagnostics":
        return cls(
            iterations=int(d["iterations"]),
            kkt_gap=float(d["kkt_gap"]),
            dual_objective=float(d["dual_objective"]),
            n_margin_violations=int(d.get("n_margin_violations", 0)),
        )


# ---------------------------------------------------------------------------
# Binary classifier
# ---------------------------------------------------------------------------
@dataclass
class BinarySvmModel:
    """Soft-margin kernel classifier in dual form.

    dual_coef holds alpha_i * y_i for the retained support vectors only;
    decision(x) = sum_i dual_coef_i k(sv_i, x) + bias.
    """

    kernel: KernelSpec
    C: float
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    diagnostics: SolveDiagnostics

    def decision_values(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.support_vectors.shape[1]:
            raise ValidationError(
                f"feature dimension mismatch: model {self.support_vectors.shape[1]}, "
                f"input {x.shape[1]}"
            )
        k = kernel_matrix(self.kernel, x, self.support_vectors)
        return k @ self.dual_coef + self.bias

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.to_dict(),
            "C": self.C,
            "support_vectors": self.support_vectors.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "bias": self.bias,
            "diagnostics": self.diagnostics.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BinarySvmModel":
        return cls(
            kernel=KernelSpec.from_dict(d["kernel"]),
            C=float(d["C"]),
            support_vectors=np.asarray(d["support_vectors"], dtype=float),
            dual_coef=np.asarray(d["dual_coef"], dtype=float),
            bias=float(d["bias"]),
            diagnostics=SolveDiagnostics.from_dict(d["diagnostics"]),
        )


def _validate_training_matrix(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2:
        raise ValidationError("training vectors must form a 2-D matrix")
    if y.shape != (x.shape[0],):
        raise ValidationError("one label per training vector required")
    if not np.all(np.isfinite(x)):
        raise ValidationError("training vectors contain non-finite values")
    return x, y


def train_binary(
    x: np.ndarray,
    y: np.ndarray,
    C: float,
    kernel: KernelSpec,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> BinarySvmModel:
    """Train a binary classifier on labels in {-1, +1}.

    Raises
    ------
    ValidationError
        Single-class label set or bad inputs.
    ConvergenceError
        Iteration cap reached before the KKT tolerance.
    """
    x, y = _validate_training_matrix(x, y)
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValidationError("binary labels must be drawn from {-1, +1}")
    if np.unique(y).size < 2:
        raise ValidationError("training set contains a single class")
    if C <= 0.0:
        raise ValidationError("C must be > 0")

    k = kernel_matrix(kernel, x)
    diag = np.diag(k).copy()

    def q_row(i: int) -> np.ndarray:
        return y[i] * (y * k[i])

    res = smo_solve(q_row, diag, -np.ones(y.size), y, C, tol=tol, max_iter=max_iter)

    sv = res.alpha > 0.0
    dual_coef = res.alpha[sv] * y[sv]
    decisions = k[:, sv] @ dual_coef + res.bias
    n_viol = int(np.sum(y * decisions < 1.0 - 1e-9))
    return BinarySvmModel(
        kernel=kernel,
        C=C,
        support_vectors=x[sv].copy(),
        dual_coef=dual_coef,
        bias=res.bias,
        diagnostics=SolveDiagnostics(res.iterations, res.kkt_gap, res.dual_objective, n_viol),
    )


def predict_binary(model: BinarySvmModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Labels in {-1, +1} and decision values; a zero decision maps to +1."""
    d = model.decision_values(x)
    labels = np.where(d >= 0.0, 1.0, -1.0)
    return labels, d


# ---------------------------------------------------------------------------
# One-vs-one multi-class
# ---------------------------------------------------------------------------
@dataclass
class MultiClassModel:
    """One-vs-one ensemble: one binary model per unordered class pair.

    For the pair (a, b) with a before b in class_order, +1 means a. Ties in
    the vote are broken by the largest summed |decision value| collected by
    each tied class, then by the earliest class in class_order.
    """

    class_order: list[str]
    pairs: list[tuple[str, str]]
    models: list[BinarySvmModel]
    tie_break: str = "summed_decision_then_first_label"

    def to_dict(self) -> dict:
        return {
            "class_order": list(self.class_order),
            "pairs": [list(p) for p in self.pairs],
            "models": [m.to_dict() for m in self.models],
            "tie_break": self.tie_break,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MultiClassModel":
        return cls(
            class_order=list(d["class_order"]),
            pairs=[tuple(p) for p in d["pairs"]],
            models=[BinarySvmModel.from_dict(m) for m in d["models"]],
            tie_break=d.get("tie_break", "summed_decision_then_first_label"),
        )


def train_multiclass(
    x: np.ndarray,
    labels: Sequence[str],
    class_order: Sequence[str],
    C: float,
    kernel: KernelSpec,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> MultiClassModel:
    """Train K(K-1)/2 pairwise classifiers over the declared class order."""
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels, dtype=object)
    class_order = list(class_order)
    if len(class_order) < 2:
        raise ValidationError("multi-class training needs >= 2 classes")
    present = set(labels.tolist())
    missing = [c for c in class_order if c not in present]
    if missing:
        raise ValidationError(f"classes without training examples: {missing}")
    unknown = present.difference(class_order)
    if unknown:
        raise ValidationError(f"labels outside the declared class set: {sorted(unknown)}")

    pairs: list[tuple[str, str]] = []
    models: list[BinarySvmModel] = []
    for ia in range(len(class_order)):
        for ib in range(ia + 1, len(class_order)):
            a, b = class_order[ia], class_order[ib]
            mask = (labels == a) | (labels == b)
            y = np.where(labels[mask] == a, 1.0, -1.0)
            models.append(train_binary(x[mask], y, C, kernel, tol=tol, max_iter=max_iter))
            pairs.append((a, b))
    return MultiClassModel(class_order=class_order, pairs=pairs, models=models)


def predict_multiclass(
    model: MultiClassModel, x: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Predicted labels, vote counts (n, K), pair decision values (n, P)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[0]
    k = len(model.class_order)
    votes = np.zeros((n, k), dtype=int)
    scores = np.zeros((n, k))
    decisions = np.empty((n, len(model.pairs)))
    index = {c: i for i, c in enumerate(model.class_order)}
    for p, ((a, b), sub) in enumerate(zip(model.pairs, model.models)):
        d = sub.decision_values(x)
        decisions[:, p] = d
        a_wins = d >= 0.0
        ia, ib = index[a], index[b]
        votes[a_wins, ia] += 1
        votes[~a_wins, ib] += 1
        scores[a_wins, ia] += np.abs(d[a_wins])
        scores[~a_wins, ib] += np.abs(d[~a_wins])

    labels = np.empty(n, dtype=object)
    for i in range(n):
        top = votes[i].max()
        tied = np.flatnonzero(votes[i] == top)
        if tied.size > 1:
            best_score = scores[i, tied].max()
            tied = tied[scores[i, tied] == best_score]
        labels[i] = model.class_order[int(tied[0])]
    return labels, votes, decisions


# ---------------------------------------------------------------------------
# Epsilon regression
# ---------------------------------------------------------------------------
@dataclass
class SvrModel:
    """Kernel epsilon-regression in dual form.

    dual_coef holds alpha_i - alpha_i^* for retained support vectors;
    f(x) = sum_i dual_coef_i k(sv_i, x) + bias.
    """

    kernel: KernelSpec
    C: float
    epsilon: float
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    diagnostics: SolveDiagnostics

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.support_vectors.size == 0:
            return np.full(x.shape[0], self.bias)
        if x.shape[1] != self.support_vectors.shape[1]:
            raise ValidationError(
                f"feature dimension mismatch: model {self.support_vectors.shape[1]}, "
                f"input {x.shape[1]}"
            )
        k = kernel_matrix(self.kernel, x, self.support_vectors)
        return k @ self.dual_coef + self.bias

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.to_dict(),
            "C": self.C,
            "epsilon": self.epsilon,
            "support_vectors": self.support_vectors.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "bias": self.bias,
            "diagnostics": self.diagnostics.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvrModel":
        n_sv = len(d["support_vectors"])
        sv = np.asarray(d["support_vectors"], dtype=float)
        if n_sv == 0:
            sv = sv.reshape(0, 0)
        return cls(
            kernel=KernelSpec.from_dict(d["kernel"]),
            C=float(d["C"]),
            epsilon=float(d["epsilon"]),
            support_vectors=sv,
            dual_coef=np.asarray(d["dual_coef"], dtype=float),
            bias=float(d["bias"]),
            diagnostics=SolveDiagnostics.from_dict(d["diagnostics"]),
        )


def train_svr(
    x: np.ndarray,
    y: np.ndarray,
    C: float,
    epsilon: float,
    kernel: KernelSpec,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SvrModel:
    """Train epsilon-insensitive regression on real-valued targets.

    The doubled dual (alpha, alpha^*) is solved as one box QP with signs
    s = [+1..., -1...] and linear term [eps - y; eps + y].
    """
    x, y = _validate_training_matrix(x, y)
    if x.shape[0] < 2:
        raise ValidationError("regression needs >= 2 training examples")
    if epsilon < 0.0:
        raise ValidationError("epsilon must be >= 0")
    if C <= 0.0:
        raise ValidationError("C must be > 0")

    m = x.shape[0]
    k = kernel_matrix(kernel, x)
    kdiag = np.diag(k)
    s = np.concatenate([np.ones(m), -np.ones(m)])
    p = np.concatenate([epsilon - y, epsilon + y])
    diag = np.concatenate([kdiag, kdiag])

    def q_row(i: int) -> np.ndarray:
        base = k[i % m]
        row = np.concatenate([base, -base])
        return row if i < m else -row

    res = smo_solve(q_row, diag, p, s, C, tol=tol, max_iter=max_iter)
    coef = res.alpha[:m] - res.alpha[m:]
    sv = coef != 0.0
    sv_x = x[sv].copy() if sv.any() else np.empty((0, x.shape[1]))
    return SvrModel(
        kernel=kernel,
        C=C,
        epsilon=epsilon,
        support_vectors=sv_x,
        dual_coef=coef[sv],
        bias=res.bias,
        diagnostics=SolveDiagnostics(res.iterations, res.kkt_gap, res.dual_objective),
    )


def predict_svr(model: SvrModel, x: np.ndarray) -> np.ndarray:
    return model.predict(x)
