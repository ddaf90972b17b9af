"""From-scratch support-vector family trained by sequential minimal optimization."""

from .kernels import KernelSpec, kernel_eval, kernel_matrix
from .models import (
    BinarySvmModel,
    MultiClassModel,
    SolveDiagnostics,
    SvrModel,
    predict_binary,
    predict_multiclass,
    predict_svr,
    train_binary,
    train_multiclass,
    train_svr,
)
from .search import (
    GridCell,
    GridSearchResult,
    grid_search_cv,
    kfold_indices,
    stratified_kfold_indices,
)
from .solver import ConvergenceError, SmoResult, kkt_violations, smo_solve

__all__ = [
    "KernelSpec",
    "kernel_eval",
    "kernel_matrix",
    "BinarySvmModel",
    "MultiClassModel",
    "SvrModel",
    "SolveDiagnostics",
    "train_binary",
    "predict_binary",
    "train_multiclass",
    "predict_multiclass",
    "train_svr",
    "predict_svr",
    "GridCell",
    "GridSearchResult",
    "grid_search_cv",
    "kfold_indices",
    "stratified_kfold_indices",
    "ConvergenceError",
    "SmoResult",
    "smo_solve",
    "kkt_violations",
]
