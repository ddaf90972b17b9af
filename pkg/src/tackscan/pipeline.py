"""Pipeline stages: simulate, extract, train, predict, evaluate, map.

Every stage is a plain function over files plus a RunConfig, so the CLI
subcommands and the single-command study presets share one code path and
produce byte-identical artifacts for identical seeds.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import dataset as ds
from .config import ConfigError, RunConfig
from .features import apply_normalizer, extract_feature_matrix, fit_normalizer
from .forward import simulate_survey
from .maps import assemble_map, export_map_csv, export_map_pgm
from .metrics import EvalReport, evaluate_classification, evaluate_regression
from .modelfile import ModelBundle, SplitRecord, save_model
from .presets import preset_tasks, preset_thresholds, run_preset
from .scene import (
    BINARY_SCHEME,
    FOUR_CLASS_SCHEME,
    PavementScene,
    ValidationError,
    grid_shape,
    quantity_label_scheme,
    quantity_to_class,
)
from .svm import (
    grid_search_cv,
    predict_binary,
    predict_multiclass,
    predict_svr,
    train_binary,
    train_multiclass,
    train_svr,
)

__all__ = [
    "ThresholdFailure",
    "run_simulate",
    "run_features",
    "run_train",
    "run_predict",
    "run_evaluate",
    "run_map",
    "run_reproduce",
]

logger = logging.getLogger(__name__)

PRED_POSITION_FMT = "%.4f"
PRED_QUANTITY_FMT = "%.6g"
PRED_VALUE_FMT = "%.6f"
PRED_DECISION_FMT = "%.10e"


class ThresholdFailure(RuntimeError):
    """A study preset missed one of its acceptance thresholds."""


# ---------------------------------------------------------------------------
# Label derivation per task
# ---------------------------------------------------------------------------
def _scheme_for_task(cfg_scheme_kind: str, quantities: Sequence[float], task: str):
    if task == "tcsvm":
        return BINARY_SCHEME
    if task == "svr":
        return None
    if cfg_scheme_kind == "binary":
        return BINARY_SCHEME
    if cfg_scheme_kind == "four_class":
        return FOUR_CLASS_SCHEME
    if cfg_scheme_kind == "quantity_labels":
        return quantity_label_scheme(quantities)
    raise ValidationError(f"unknown scheme kind {cfg_scheme_kind!r}")


def derive_labels(quantity: np.ndarray, task: str, scheme) -> tuple[np.ndarray, list[str]]:
    """Per-trace training labels and the declared class order for a task."""
    if task == "svr":
        return np.asarray(quantity, dtype=float), []
    labels = np.asarray([quantity_to_class(float(q), scheme) for q in quantity], dtype=object)
    return labels, list(scheme.labels)


def _validate_task(task: str, scheme_kind: str) -> None:
    if task not in ("tcsvm", "mcsvm", "svr"):
        raise ConfigError(f"unknown svm.task {task!r}")
    if task == "mcsvm" and scheme_kind == "binary":
        raise ConfigError("svm.task=mcsvm needs a multi-class labeling scheme")


# ---------------------------------------------------------------------------
# Splits
# ---------------------------------------------------------------------------
def split_indices(
    cfg: RunConfig,
    x: np.ndarray,
    labels: Optional[np.ndarray],
) -> tuple[np.ndarray, np.ndarray]:
    """Train/test row indices under the configured split policy."""
    mode = cfg.get("split.mode")
    fraction = cfg.get("split.train_fraction")
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"split.train_fraction must be in (0,1), got {fraction}")
    seed = cfg.seed_for("split.seed")
    n = x.size
    rng = np.random.default_rng(seed)
    if mode == "random":
        if labels is None:
            order = rng.permutation(n)
            n_train = int(round(fraction * n))
            if n_train == 0 or n_train == n:
                raise ConfigError("degenerate split: empty train or test subset")
            return np.sort(order[:n_train]), np.sort(order[n_train:])
        # Stratified: split each class at the fraction independently.
        train_parts, test_parts = [], []
        for ci, c in enumerate(sorted(set(labels.tolist()), key=str)):
            idx = np.flatnonzero(labels == c)
            idx = idx[np.random.default_rng((seed, ci)).permutation(idx.size)]
            n_train = int(round(fraction * idx.size))
            n_train = min(max(n_train, 1), idx.size - 1)
            if idx.size < 2:
                raise ConfigError(f"class {c!r} has a single example; cannot split")
            train_parts.append(idx[:n_train])
            test_parts.append(idx[n_train:])
        return np.sort(np.concatenate(train_parts)), np.sort(np.concatenate(test_parts))
    if mode == "spatial_block":
        block_len = cfg.get("split.block_length")
        if block_len <= 0:
            raise ConfigError("split.block_length must be > 0")
        blocks = np.floor(x / block_len).astype(int)
        unique = np.unique(blocks)
        order = unique[rng.permutation(unique.size)]
        target_test = (1.0 - fraction) * n
        test_blocks = set()
        count = 0
        for b in order:
            if count >= target_test:
                break
            test_blocks.add(int(b))
            count += int(np.sum(blocks == b))
        test_mask = np.isin(blocks, sorted(test_blocks))
        if not test_mask.any() or test_mask.all():
            raise ConfigError("degenerate spatial split: empty train or test subset")
        return np.flatnonzero(~test_mask), np.flatnonzero(test_mask)
    raise ConfigError(f"unknown split.mode {mode!r}")


def _subsample(indices: np.ndarray, cap: int, seed) -> np.ndarray:
    if cap <= 0 or indices.size <= cap:
        return indices
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(indices, size=cap, replace=False))


# ---------------------------------------------------------------------------
# Stage: simulate
# ---------------------------------------------------------------------------
def run_simulate(cfg: RunConfig, out_dir: Union[str, Path]) -> ds.DatasetManifest:
    """Simulate the configured survey; write trace table, sidecar, manifest,
    and ground-truth maps. Returns the dataset manifest."""
    out = Path(out_dir)
    (out / "dataset").mkdir(parents=True, exist_ok=True)
    (out / "truth").mkdir(parents=True, exist_ok=True)

    scene = PavementScene(cfg.scene_spec())
    survey = simulate_survey(scene, cfg.pulse(), cfg.acquisition(), cfg.profiles())

    manifest = ds.write_survey(
        survey,
        out / "dataset" / "trace_table.csv",
        out / "dataset" / "metadata.txt",
        scene=scene,
    )
    manifest.save(out / "dataset" / "manifest.json")

    nodes = list(zip(*scene.node_positions()))
    truth_q = assemble_map(
        scene.shape, scene.step, nodes,
        [float(v) for v in scene.tack_coat_quantity.ravel()],
        kind="quantity",
    )
    export_map_csv(truth_q, out / "truth" / "truth_quantity.csv")
    truth_c = assemble_map(
        scene.shape, scene.step, nodes,
        list(scene.ground_truth_class.ravel()),
        kind="class",
    )
    export_map_csv(truth_c, out / "truth" / "truth_class.csv")
    export_map_pgm(truth_c, out / "truth" / "truth_class.pgm", labels=list(scene.scheme.labels))
    return manifest


# ---------------------------------------------------------------------------
# Stage: feature extraction
# ---------------------------------------------------------------------------
def run_features(
    cfg: RunConfig,
    trace_table: Union[str, Path],
    metadata: Union[str, Path],
    features_out: Union[str, Path],
) -> Path:
    data = ds.read_trace_table(trace_table, metadata)
    fcfg = cfg.feature_config()
    mat = extract_feature_matrix(data.samples, data.dt, fcfg)
    ds.write_features(
        ds.FeatureDataset(x=data.x, y=data.y, label=data.quantity, features=mat),
        features_out,
    )
    logger.info("extracted %d feature vectors of dimension %d", mat.shape[0], mat.shape[1])
    return Path(features_out)


# ---------------------------------------------------------------------------
# Stage: train
# ---------------------------------------------------------------------------
def run_train(
    cfg: RunConfig,
    features_path: Union[str, Path],
    model_out: Union[str, Path],
    search_log_out: Union[str, Path],
    task: Optional[str] = None,
    trace_checksum: Optional[str] = None,
) -> ModelBundle:
    """Split, normalize, grid-search, and fit the configured estimator."""
    task = task if task is not None else cfg.get("svm.task")
    scheme_kind = cfg.get("scene.scheme")
    quantities = cfg.get("scene.quantity_labels") or []
    if cfg.get("scene.preset"):
        preset_scheme = cfg.scene_spec().scheme
        scheme_kind = preset_scheme.kind
        quantities = list(preset_scheme.quantities)
    _validate_task(task, scheme_kind)

    feats = ds.read_features(features_path)
    if feats.label is None:
        raise ValidationError("training needs a labeled dataset (empty label column)")
    scheme = _scheme_for_task(scheme_kind, quantities, task)
    labels, class_order = derive_labels(feats.label, task, scheme)

    strat = labels if task != "svr" else None
    train_idx, test_idx = split_indices(cfg, feats.x, strat)
    seed = cfg.seed_for("split.seed")
    train_idx = _subsample(train_idx, cfg.get("svm.max_train"), (seed, 1))
    cv_idx = _subsample(train_idx, cfg.get("svm.cv_max_train"), (seed, 2))

    norm = fit_normalizer(feats.features[train_idx])
    x_train = apply_normalizer(norm, feats.features[train_idx])
    x_cv = apply_normalizer(norm, feats.features[cv_idx])

    dim = feats.dim
    gamma_grid = [s / dim for s in cfg.get("svm.grid_gamma_scale")]
    kernel_kind = cfg.get("svm.kernel")
    tol = cfg.get("svm.tol")
    max_iter = cfg.get("svm.max_iter")
    metric = cfg.get("search.metric") or None

    if task == "tcsvm":
        y_cv = np.where(labels[cv_idx] == "present", 1.0, -1.0)
        search = grid_search_cv(
            x_cv, y_cv, "binary", cfg.get("svm.grid_c"), gamma_grid,
            cfg.get("svm.folds"), cfg.seed_for("search.seed"),
            kernel_kind=kernel_kind, metric=metric, tol=tol, max_iter=max_iter,
        )
        y_train = np.where(labels[train_idx] == "present", 1.0, -1.0)
        estimator = train_binary(
            x_train, y_train, search.best.C,
            search.best.kernel(kernel_kind, cfg.get("svm.degree"), cfg.get("svm.coef0")),
            tol=tol, max_iter=max_iter,
        )
    elif task == "mcsvm":
        search = grid_search_cv(
            x_cv, labels[cv_idx], "multiclass", cfg.get("svm.grid_c"), gamma_grid,
            cfg.get("svm.folds"), cfg.seed_for("search.seed"),
            kernel_kind=kernel_kind, class_order=class_order, metric=metric,
            tol=tol, max_iter=max_iter,
        )
        estimator = train_multiclass(
            x_train, labels[train_idx], class_order, search.best.C,
            search.best.kernel(kernel_kind, cfg.get("svm.degree"), cfg.get("svm.coef0")),
            tol=tol, max_iter=max_iter,
        )
    else:
        search = grid_search_cv(
            x_cv, labels[cv_idx], "svr", cfg.get("svm.grid_c"), gamma_grid,
            cfg.get("svm.folds"), cfg.seed_for("search.seed"),
            kernel_kind=kernel_kind, grid_epsilon=cfg.get("svm.grid_epsilon"),
            metric=metric, tol=tol, max_iter=max_iter,
        )
        estimator = train_svr(
            x_train, labels[train_idx], search.best.C, search.best.epsilon,
            search.best.kernel(kernel_kind, cfg.get("svm.degree"), cfg.get("svm.coef0")),
            tol=tol, max_iter=max_iter,
        )

    bundle = ModelBundle(
        task=task,
        feature_config=cfg.feature_config(),
        normalizer=norm,
        estimator=estimator,
        class_order=class_order,
        scheme_kind=scheme.kind if scheme is not None else "none",
        scheme_quantities=list(scheme.quantities) if scheme is not None else [],
        split=SplitRecord(
            dataset_checksum=trace_checksum or ds.file_checksum(features_path),
            checksum_kind="trace_table" if trace_checksum else "features",
            mode=cfg.get("split.mode"),
            train_fraction=cfg.get("split.train_fraction"),
            seed=seed,
            test_indices=[int(i) for i in test_idx],
        ),
    )
    save_model(bundle, model_out)
    Path(search_log_out).write_text("\n".join(search.log_lines()) + "\n")
    logger.info("trained %s: best C=%g gamma=%g", task, search.best.C, search.best.gamma)
    return bundle


# ---------------------------------------------------------------------------
# Stage: predict
# ---------------------------------------------------------------------------
@dataclass
class PredictionResult:
    task: str
    x: np.ndarray
    y: np.ndarray
    truth_quantity: Optional[np.ndarray]
    truth_label: Optional[np.ndarray]  # None for svr
    predicted: np.ndarray  # labels (object) or quantities (float)
    decisions: np.ndarray  # (n, n_decision_cols)
    decision_names: list[str]
    subset: np.ndarray  # "train" | "test" | "none"
    class_order: list[str]


def predict_dataset(
    bundle: ModelBundle,
    trace_table: Union[str, Path],
    metadata: Union[str, Path],
) -> PredictionResult:
    """Re-extract features per the model's own config and predict all rows."""
    data = ds.read_trace_table(trace_table, metadata)
    mat = extract_feature_matrix(data.samples, data.dt, bundle.feature_config)
    if mat.shape[1] != bundle.feature_dim():
        raise ValidationError(
            f"feature dimension mismatch: model expects {bundle.feature_dim()}, "
            f"dataset yields {mat.shape[1]}"
        )
    xn = apply_normalizer(bundle.normalizer, mat)

    subset = np.full(data.n_traces, "none", dtype=object)
    split = bundle.split
    if split is not None:
        if split.checksum_kind == "trace_table":
            # verifiable: apply only to the exact training dataset
            applies = ds.file_checksum(trace_table) == split.dataset_checksum
        else:
            # trained from a bare features file; best effort by row count
            applies = _row_count_matches(split, data.n_traces)
        if applies:
            subset[:] = "train"
            subset[np.asarray(split.test_indices, dtype=int)] = "test"

    truth_label = None
    if bundle.task == "tcsvm":
        y_pred, d = predict_binary(bundle.estimator, xn)
        predicted = np.where(y_pred > 0, "present", "absent").astype(object)
        decisions = d[:, None]
        names = ["decision"]
    elif bundle.task == "mcsvm":
        predicted, votes, decisions = predict_multiclass(bundle.estimator, xn)
        names = [f"dv_{a}_vs_{b}" for a, b in bundle.estimator.pairs]
    else:
        predicted = predict_svr(bundle.estimator, xn)
        decisions = np.empty((data.n_traces, 0))
        names = []

    if data.quantity is not None and bundle.task != "svr":
        scheme = _scheme_for_task(bundle.scheme_kind, bundle.scheme_quantities, bundle.task)
        truth_label, _ = derive_labels(data.quantity, bundle.task, scheme)

    return PredictionResult(
        task=bundle.task,
        x=data.x,
        y=data.y,
        truth_quantity=data.quantity,
        truth_label=truth_label,
        predicted=predicted,
        decisions=decisions,
        decision_names=names,
        subset=subset,
        class_order=list(bundle.class_order),
    )


def _row_count_matches(split: SplitRecord, n: int) -> bool:
    if not split.test_indices:
        return False
    return max(split.test_indices) < n


def write_predictions(pred: PredictionResult, path: Union[str, Path]) -> None:
    header = ["x", "y", "truth_quantity", "truth_label", "predicted", "subset"]
    header += pred.decision_names
    lines = [",".join(header)]
    n = pred.x.size
    for i in range(n):
        tq = "" if pred.truth_quantity is None else PRED_QUANTITY_FMT % pred.truth_quantity[i]
        tl = "" if pred.truth_label is None else str(pred.truth_label[i])
        if pred.task == "svr":
            pv = PRED_VALUE_FMT % float(pred.predicted[i])
        else:
            pv = str(pred.predicted[i])
        row = [
            PRED_POSITION_FMT % pred.x[i],
            PRED_POSITION_FMT % pred.y[i],
            tq,
            tl,
            pv,
            str(pred.subset[i]),
        ]
        row += [PRED_DECISION_FMT % v for v in pred.decisions[i]]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def run_predict(
    bundle: ModelBundle,
    trace_table: Union[str, Path],
    metadata: Union[str, Path],
    predictions_out: Union[str, Path],
) -> PredictionResult:
    pred = predict_dataset(bundle, trace_table, metadata)
    write_predictions(pred, predictions_out)
    return pred


# ---------------------------------------------------------------------------
# Stage: evaluate
# ---------------------------------------------------------------------------
def evaluate_predictions(
    pred: PredictionResult,
    subset: str = "test",
    exclusion_margin: float = 0.0,
    boundaries: Sequence[float] = (),
) -> EvalReport:
    """Metrics over one subset of a prediction run.

    subset "test" keeps only withheld traces (the default and the honest
    number); "train" and "all" are for diagnostics behind an explicit
    leakage override upstream.
    """
    if pred.truth_quantity is None:
        raise ValidationError("cannot evaluate a prediction-only dataset (no labels)")
    if subset == "all":
        mask = np.ones(pred.x.size, dtype=bool)
    elif subset in ("train", "test"):
        mask = pred.subset == subset
    else:
        raise ValidationError(f"unknown evaluation subset {subset!r}")
    if subset == "test" and not mask.any():
        raise ValidationError(
            "no withheld traces recorded for this dataset; the model was not "
            "trained on it (use --allow-train-eval to evaluate everything)"
        )
    if exclusion_margin > 0.0 and len(boundaries) > 0:
        x = pred.x
        near = np.zeros_like(mask)
        for b in boundaries:
            near |= np.abs(x - b) < exclusion_margin
        mask &= ~near
    if not mask.any():
        raise ValidationError("evaluation subset is empty after filtering")

    if pred.task == "svr":
        return evaluate_regression(pred.truth_quantity[mask], pred.predicted[mask].astype(float))
    return evaluate_classification(
        pred.truth_label[mask], pred.predicted[mask], pred.class_order
    )


def run_evaluate(
    pred: PredictionResult,
    report_txt: Union[str, Path],
    report_kv: Union[str, Path],
    subset: str = "test",
    exclusion_margin: float = 0.0,
    boundaries: Sequence[float] = (),
) -> EvalReport:
    report = evaluate_predictions(pred, subset, exclusion_margin, boundaries)
    Path(report_txt).write_text(report.to_text())
    Path(report_kv).write_text(report.to_kv())
    return report


# ---------------------------------------------------------------------------
# Stage: map
# ---------------------------------------------------------------------------
def run_map(
    pred: PredictionResult,
    metadata: dict[str, str],
    map_csv: Union[str, Path],
    map_pgm: Union[str, Path],
) -> None:
    try:
        length = float(metadata["scene.length"])
        width = float(metadata["scene.width"])
        step = float(metadata["scene.step"])
    except KeyError as exc:
        raise ValidationError(f"metadata missing scene geometry key {exc}") from None
    shape = grid_shape(length, width, step)
    kind = "quantity" if pred.task == "svr" else "class"
    values = [float(v) for v in pred.predicted] if kind == "quantity" else list(pred.predicted)
    cmap = assemble_map(shape, step, list(zip(pred.x, pred.y)), values, kind=kind)
    export_map_csv(cmap, map_csv)
    if kind == "class":
        export_map_pgm(cmap, map_pgm, labels=pred.class_order)
    else:
        export_map_pgm(cmap, map_pgm)


# ---------------------------------------------------------------------------
# Stage: reproduce
# ---------------------------------------------------------------------------
def run_reproduce(
    preset_name: str,
    out_dir: Union[str, Path],
    overrides: Optional[dict[str, str]] = None,
) -> tuple[bool, str]:
    """Full study: simulate -> extract -> per-task train/predict/evaluate/map.

    Writes a deterministic metric summary and returns (all thresholds met,
    summary text). Stage failures propagate with the stage name attached.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = RunConfig(run_preset(preset_name), overrides or {})
    (out / "config.txt").write_text(cfg.dump())
    for sub in ("features", "models", "predictions", "reports", "maps"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    stage = "simulate"
    try:
        manifest = run_simulate(cfg, out)
        trace_table = out / "dataset" / "trace_table.csv"
        metadata_path = out / "dataset" / "metadata.txt"
        metadata = ds.read_metadata(metadata_path)

        stage = "features"
        features_path = out / "features" / "features.csv"
        run_features(cfg, trace_table, metadata_path, features_path)

        reports: dict[str, EvalReport] = {}
        for task in preset_tasks(preset_name):
            stage = f"train[{task}]"
            bundle = run_train(
                cfg,
                features_path,
                out / "models" / f"{task}.json",
                out / "models" / f"{task}_search_log.txt",
                task=task,
                trace_checksum=manifest.checksum,
            )
            stage = f"predict[{task}]"
            pred = run_predict(bundle, trace_table, metadata_path, out / "predictions" / f"{task}.csv")
            stage = f"evaluate[{task}]"
            boundaries = [float(b) for b in metadata.get("scene.boundaries", "").split(",") if b]
            reports[task] = run_evaluate(
                pred,
                out / "reports" / f"{task}_report.txt",
                out / "reports" / f"{task}_report.kv",
                subset="test",
                exclusion_margin=cfg.get("eval.exclusion_margin"),
                boundaries=boundaries,
            )
            stage = f"map[{task}]"
            run_map(pred, metadata, out / "maps" / f"{task}_map.csv", out / "maps" / f"{task}_map.pgm")
    except Exception as exc:
        raise RuntimeError(f"stage {stage} failed: {exc}") from exc

    summary_lines = [f"preset = {preset_name}", f"seed = {cfg.get('seed')}", f"traces = {manifest.n_traces}"]
    kv_lines = list(summary_lines)
    all_ok = True
    for task, report in reports.items():
        if report.macro_dice is not None:
            kv_lines.append(f"{task}.macro_dice = {report.macro_dice:.6f}")
            summary_lines.append(f"{task + ' macro dice':<20}: {report.macro_dice:.6f}")
            for label in report.confusion.labels:
                kv_lines.append(f"{task}.dice.{label} = {_fmt_opt(report.dice.get(label))}")
        if report.rmse is not None:
            kv_lines.append(f"{task}.rmse = {report.rmse:.6f}")
            summary_lines.append(f"{task + ' rmse [g/m^2]':<20}: {report.rmse:.6f}")
    for task, metric, op, threshold in preset_thresholds(preset_name):
        value = getattr(reports[task], metric)
        ok = value >= threshold if op == ">=" else value <= threshold
        all_ok &= ok
        verdict = "pass" if ok else "FAIL"
        summary_lines.append(
            f"threshold {task}.{metric} {op} {threshold:g}: measured {value:.6f} -> {verdict}"
        )
        kv_lines.append(f"threshold.{task}.{metric} = {'pass' if ok else 'fail'}")
    summary_lines.append(f"overall = {'pass' if all_ok else 'FAIL'}")
    kv_lines.append(f"overall = {'pass' if all_ok else 'fail'}")

    summary = "\n".join(summary_lines) + "\n"
    (out / "summary.txt").write_text(summary)
    (out / "summary.kv").write_text("\n".join(kv_lines) + "\n")
    return all_ok, summary


def _fmt_opt(v: Optional[float]) -> str:
    return "nodata" if v is None else f"{v:.6f}"
