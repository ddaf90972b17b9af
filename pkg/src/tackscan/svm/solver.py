"""Sequential minimal optimization for box-constrained duals.

Solves problems of the form

    min  0.5 a' Q a + p' a
    s.t. s' a = 0,   0 <= a_i <= C

with the maximal-violating-pair working-set rule. Both the soft-margin
classifier dual (Q = yy' o K, p = -1, s = y) and the epsilon-regression
dual (doubled variables, s = [+1...,-1...]) reduce to this shape, so one
solver serves the whole model family.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["SmoResult", "ConvergenceError", "smo_solve", "kkt_violations"]

# Curvature floor for numerically semidefinite pairs.
TAU = 1e-12


class ConvergenceError(RuntimeError):
    """Solver hit its pair-update cap before meeting the KKT tolerance."""

    def __init__(self, iterations: int, kkt_gap: float, tol: float):
        self.iterations = iterations
        self.kkt_gap = kkt_gap
        super().__init__(
            f"SMO did not converge in {iterations} pair updates: "
            f"max KKT violation {kkt_gap:.3e} > tol {tol:.3e}"
        )


@dataclass
class SmoResult:
    alpha: np.ndarray
    bias: float
    iterations: int
    kkt_gap: float
    dual_objective: float


def smo_solve(
    q_row: Callable[[int], np.ndarray],
    diag: np.ndarray,
    p: np.ndarray,
    s: np.ndarray,
    C: float,
    tol: float = 1e-3,
    max_iter: int = 1_000_000,
) -> SmoResult:
    """Run SMO to KKT tolerance tol.

    q_row(i) must return row i of Q. The returned bias is the midpoint of
    the optimal-multiplier bracket, so the decision offset of an SVM is the
    bias directly. Deterministic for a fixed input ordering.
    """
    n = p.size
    alpha = np.zeros(n)
    grad = p.astype(float).copy()
    pos = s > 0

    at_lo = np.ones(n, dtype=bool)  # alpha == 0
    at_hi = np.zeros(n, dtype=bool)  # alpha == C

    iterations = 0
    while True:
        # I_up: can move alpha along +s; I_low: along -s.
        up = np.where(pos, ~at_hi, ~at_lo)
        low = np.where(pos, ~at_lo, ~at_hi)
        viol = -s * grad
        vu = np.where(up, viol, -np.inf)
        vl = np.where(low, viol, np.inf)
        i = int(np.argmax(vu))
        j = int(np.argmin(vl))
        m = vu[i]
        big_m = vl[j]
        gap = m - big_m
        if gap <= tol:
            bias = float(0.5 * (m + big_m)) if np.isfinite(m) and np.isfinite(big_m) else 0.0
            break
        if iterations >= max_iter:
            raise ConvergenceError(iterations, float(gap), tol)

        qi = q_row(i)
        qj = q_row(j)
        quad = diag[i] + diag[j] - 2.0 * s[i] * s[j] * qi[j]
        if quad <= 0.0:
            quad = TAU
        t = gap / quad
        # Box caps along the feasible direction (+s_i on i, -s_j on j).
        cap_i = C - alpha[i] if s[i] > 0 else alpha[i]
        cap_j = alpha[j] if s[j] > 0 else C - alpha[j]
        t = min(t, cap_i, cap_j)

        ai = alpha[i] + s[i] * t
        aj = alpha[j] - s[j] * t
        # Snap to the box to keep the index sets exact.
        if ai <= 0.0:
            ai = 0.0
        elif ai >= C:
            ai = C
        if aj <= 0.0:
            aj = 0.0
        elif aj >= C:
            aj = C
        d_i = ai - alpha[i]
        d_j = aj - alpha[j]
        alpha[i] = ai
        alpha[j] = aj
        at_lo[i] = ai == 0.0
        at_hi[i] = ai == C
        at_lo[j] = aj == 0.0
        at_hi[j] = aj == C
        grad += d_i * qi + d_j * qj
        iterations += 1

    objective = float(0.5 * (alpha @ grad) + 0.5 * (alpha @ p))
    return SmoResult(
        alpha=alpha,
        bias=bias,
        iterations=iterations,
        kkt_gap=float(max(gap, 0.0)),
        dual_objective=objective,
    )


def kkt_violations(
    grad: np.ndarray, s: np.ndarray, alpha: np.ndarray, C: float, bias: float
) -> np.ndarray:
    """Per-variable violation of the optimality conditions at a given bias.

    Zero everywhere (up to solver tolerance) at convergence.
    """
    pos = s > 0
    at_lo = alpha <= 0.0
    at_hi = alpha >= C
    up = np.where(pos, ~at_hi, ~at_lo)
    low = np.where(pos, ~at_lo, ~at_hi)
    viol = -s * grad
    v_up = np.where(up, np.maximum(viol - bias, 0.0), 0.0)
    v_low = np.where(low, np.maximum(bias - viol, 0.0), 0.0)
    return np.maximum(v_up, v_low)
