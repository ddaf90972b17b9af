"""Kernel functions for the support-vector family."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..scene import ValidationError

__all__ = ["KernelSpec", "kernel_eval", "kernel_matrix"]


@dataclass(frozen=True)
class KernelSpec:
    """Kernel kind and parameters.

    rbf:        k(u, v) = exp(-gamma ||u - v||^2)
    linear:     k(u, v) = u . v
    polynomial: k(u, v) = (gamma u . v + coef0)^degree
    """

    kind: str = "rbf"
    gamma: float = 1.0
    degree: int = 3
    coef0: float = 0.0

    def __post_init__(self):
        if self.kind not in ("linear", "rbf", "polynomial"):
            raise ValidationError(f"unknown kernel kind {self.kind!r}")
        if self.kind in ("rbf", "polynomial") and self.gamma <= 0.0:
            raise ValidationError("kernel gamma must be > 0")
        if self.kind == "polynomial" and self.degree < 1:
            raise ValidationError("polynomial degree must be >= 1")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "gamma": self.gamma, "degree": self.degree, "coef0": self.coef0}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(kind=d["kind"], gamma=d["gamma"], degree=int(d["degree"]), coef0=d["coef0"])


def kernel_matrix(spec: KernelSpec, u: np.ndarray, v: Optional[np.ndarray] = None) -> np.ndarray:
    """Gram matrix K[i, j] = k(u_i, v_j); v defaults to u."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    v = u if v is None else np.atleast_2d(np.asarray(v, dtype=float))
    if u.shape[1] != v.shape[1]:
        raise ValidationError(
            f"kernel dimension mismatch: {u.shape[1]} vs {v.shape[1]}"
        )
    dots = u @ v.T
    if spec.kind == "linear":
        return dots
    if spec.kind == "polynomial":
        return (spec.gamma * dots + spec.coef0) ** spec.degree
    sq = (u**2).sum(axis=1)[:, None] + (v**2).sum(axis=1)[None, :] - 2.0 * dots
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-spec.gamma * sq)


def kernel_eval(spec: KernelSpec, u: np.ndarray, v: np.ndarray) -> float:
    """Scalar kernel value between two feature vectors."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValidationError(f"kernel dimension mismatch: {u.shape} vs {v.shape}")
    return float(kernel_matrix(spec, u[None, :], v[None, :])[0, 0])
