# orchestrator/cv_orchestrator.py
"""
Cross-Validation Orchestrator
Class-wise k-fold hyperparameter search and multi-trial evaluation

Protocol:
1. Shuffle the seen classes once (seeded) and hold out a rotating
   contiguous slice of them per fold
2. For every grid cell (param1, param2) and fold, train on the fold's
   training classes and score zero-shot on its held-out classes
   (PARALLEL over cells x folds, reduced in grid order)
3. Pick the cell with the best mean validation score
4. Retrain on all seen classes at that cell
5. Optionally repeat with shifted seeds and evaluate each final model on
   the unseen classes (mean and sample std over trials)
"""

import time
from typing import Any, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from sklearn.metrics import accuracy_score, recall_score

from models import eszsl, nszsl
from models.eszsl import EszslConfig
from models.nszsl import SolverConfig
from models.training_set import LabeledSet, TrainingSet, check_features
from utils.errors import AllCellsFailed, DimensionMismatch, EmptyTestSet, InvalidConfig, TooFewClasses
from utils.logger import zsl_logger
from utils.run_tracker import RunTracker
from utils.worker_pool import run_ordered, translate_error

Method = Literal["nszsl", "eszsl"]
Metric = Literal["top1", "top5", "mean_per_class_accuracy"]
MethodConfig = Union[SolverConfig, EszslConfig]

PARAM_NAMES = {
    "nszsl": ("lambda1", "lambda2"),
    "eszsl": ("gamma", "lambda"),
}


class CvPlan(BaseModel):
    """Fold layout, search grid (powers of ten) and trial count"""
    model_config = ConfigDict(frozen=True)

    num_folds: int = Field(5, ge=2)
    holdout_fraction: float = Field(0.2, gt=0.0, lt=1.0)
    grid_exponents: Tuple[int, ...] = Field(tuple(range(-2, 7)), min_length=1)
    num_trials: int = Field(10, ge=1)
    metric: Metric = "top1"
    seed: int = 0

    @model_validator(mode="after")
    def _check_grid(self) -> "CvPlan":
        if len(set(self.grid_exponents)) != len(self.grid_exponents):
            raise ValueError("grid exponents must be distinct")
        return self

    def grid_values(self) -> List[float]:
        return [10.0 ** b for b in sorted(self.grid_exponents)]


class CvCell(BaseModel):
    """Mean validation score of one grid cell; None when any fold failed"""
    param1: float
    param2: float
    mean_accuracy: Optional[float]
    fold_accuracies: List[Optional[float]]
    status: Literal["completed", "failed"]

    @property
    def score(self) -> float:
        return self.mean_accuracy if self.mean_accuracy is not None else float("-inf")


class CvResult(BaseModel):
    """Selected cell, full score table and the model retrained at that cell"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    method: Method
    param_names: Tuple[str, str]
    best_param1: float
    best_param2: float
    best_accuracy: float
    cells: List[CvCell]
    failures: List[dict] = []
    plan: CvPlan
    final_model: Optional[Any] = Field(None, exclude=True)

    def to_document(self) -> dict:
        p1, p2 = self.param_names
        return {
            "format_version": 1,
            "kind": "cv_result",
            "method": self.method,
            "metric": self.plan.metric,
            "plan": self.plan.model_dump(mode="json"),
            "best": {p1: self.best_param1, p2: self.best_param2, "mean_accuracy": self.best_accuracy},
            "cells": [
                {
                    p1: c.param1,
                    p2: c.param2,
                    "mean_accuracy": c.mean_accuracy,
                    "fold_accuracies": c.fold_accuracies,
                    "status": c.status,
                }
                for c in self.cells
            ],
            "failures": self.failures,
        }


class TrialReport(BaseModel):
    """Unseen-class test scores over repeated trials"""
    method: Method
    metric: Metric
    scores: List[float]
    mean: float
    std: float
    trials: List[CvResult]

    def to_document(self) -> dict:
        return {
            "format_version": 1,
            "kind": "trial_report",
            "method": self.method,
            "metric": self.metric,
            "scores": self.scores,
            "mean": self.mean,
            "std": self.std,
            "selected": [
                {r.param_names[0]: r.best_param1, r.param_names[1]: r.best_param2}
                for r in self.trials
            ],
        }


# ----------------------------------------------------------------------------
# folds
# ----------------------------------------------------------------------------

def split_classes(
    class_ids: Sequence[Any],
    plan: CvPlan,
    fold_index: int
) -> Tuple[List[Any], List[Any]]:
    """
    Training / validation classes for one fold.

    The classes are permuted once with plan.seed; fold f holds out the
    contiguous (wrapping) slice of round(holdout_fraction * C) classes
    starting at f * size. Both lists keep the input order.

    Raises:
        TooFewClasses: empty validation set or fewer than 2 training classes
    """
    if not 0 <= fold_index < plan.num_folds:
        raise InvalidConfig(f"fold_index {fold_index} outside 0..{plan.num_folds - 1}")
    num_classes = len(class_ids)
    num_val = int(np.floor(plan.holdout_fraction * num_classes + 0.5))
    if num_val == 0:
        raise TooFewClasses(
            f"holding out {plan.holdout_fraction:g} of {num_classes} classes leaves no validation class"
        )
    if num_classes - num_val < 2:
        raise TooFewClasses(
            f"holding out {num_val} of {num_classes} classes leaves fewer than 2 training classes"
        )

    order = np.random.default_rng(plan.seed).permutation(num_classes)
    start = fold_index * num_val
    held = set(int(i) for i in order[(start + np.arange(num_val)) % num_classes])
    train = [c for i, c in enumerate(class_ids) if i not in held]
    val = [c for i, c in enumerate(class_ids) if i in held]
    return train, val


def fold_datasets(
    train: TrainingSet,
    train_classes: Sequence[str],
    val_classes: Sequence[str]
) -> Tuple[TrainingSet, LabeledSet]:
    """
    Split a seen-class training set into a fold training set and a
    validation set whose classes the fold model never sees.
    """
    overlap = set(train_classes) & set(val_classes)
    if overlap:
        raise InvalidConfig(f"fold training and validation classes overlap: {sorted(overlap)}")

    position = {cid: i for i, cid in enumerate(train.class_ids)}
    labels = train.labels

    def _subset(classes: Sequence[str]) -> Tuple[np.ndarray, np.ndarray]:
        cols = np.asarray([position[c] for c in classes], dtype=np.int64)
        rows = np.flatnonzero(np.isin(labels, cols))
        remap = np.full(train.num_classes, -1, dtype=np.int64)
        remap[cols] = np.arange(cols.size)
        return rows, remap[labels[rows]]

    missing = [c for c in list(train_classes) + list(val_classes) if c not in position]
    if missing:
        raise DimensionMismatch(f"classes not in training set: {missing}")

    tr_rows, tr_labels = _subset(train_classes)
    va_rows, va_labels = _subset(val_classes)

    fold_train = TrainingSet(
        x=train.x[:, tr_rows],
        y=np.eye(len(train_classes))[tr_labels],
        z=train.z.select(train_classes),
    )
    fold_val = LabeledSet(
        x=train.x[:, va_rows],
        labels=va_labels,
        z=train.z.select(val_classes),
    )
    # no validation class may reach the fold model
    if fold_train.y.shape[1] != len(train_classes) or fold_train.z.num_classes != len(train_classes):
        raise DimensionMismatch("fold training set carries validation classes")
    return fold_train, fold_val


# ----------------------------------------------------------------------------
# fitting and scoring
# ----------------------------------------------------------------------------

def default_config(method: Method) -> MethodConfig:
    return SolverConfig() if method == "nszsl" else EszslConfig()


def cell_config(method: Method, base_config: Optional[MethodConfig], param1: float, param2: float) -> MethodConfig:
    """base_config with the two searched hyperparameters replaced"""
    base = base_config if base_config is not None else default_config(method)
    if method == "nszsl":
        if not isinstance(base, SolverConfig):
            raise InvalidConfig("nszsl needs a SolverConfig")
        return base.model_copy(update={"lambda1": param1, "lambda2": param2})
    if not isinstance(base, EszslConfig):
        raise InvalidConfig("eszsl needs an EszslConfig")
    return base.model_copy(update={"gamma": param1, "lam": param2})


def fit_method(method: Method, train: TrainingSet, config: MethodConfig, vocab_hash: Optional[str] = None):
    if method == "nszsl":
        return nszsl.fit(train, config, vocab_hash=vocab_hash)
    return eszsl.eszsl_fit(train, config, vocab_hash=vocab_hash)


def evaluate(model, test_x: np.ndarray, test_labels: Sequence[int], unseen_z, metric: Metric = "top1") -> float:
    """
    Score a model on labelled test examples of the candidate classes.

    top1: fraction correct. top5: fraction whose true class is among the
    five best (all classes when fewer than five). mean_per_class_accuracy:
    unweighted mean of per-class top-1 accuracy over the classes present.

    Raises:
        EmptyTestSet: no test examples
    """
    labels = np.asarray(test_labels, dtype=np.int64).ravel()
    test_x = np.asarray(test_x, dtype=np.float64)
    if labels.size == 0 or test_x.size == 0:
        raise EmptyTestSet("no test examples to evaluate")
    if test_x.ndim == 1:
        test_x = test_x.reshape(-1, 1)
    check_features(test_x, model.feat_dim, "test features")
    if test_x.shape[1] != labels.size:
        raise DimensionMismatch(f"{test_x.shape[1]} test examples but {labels.size} labels")
    if labels.min() < 0 or labels.max() >= unseen_z.num_classes:
        raise DimensionMismatch("test labels must index the candidate classes")

    scores = model.scores(test_x, unseen_z)
    ranked = np.argsort(-scores, axis=1, kind="stable")

    if metric == "top5":
        # top_k_accuracy_score ranks tied scores toward the higher index
        k = min(5, unseen_z.num_classes)
        return float(np.mean(np.any(ranked[:, :k] == labels[:, None], axis=1)))

    predictions = ranked[:, 0]
    if metric == "top1":
        return float(accuracy_score(labels, predictions))
    if metric == "mean_per_class_accuracy":
        return float(recall_score(labels, predictions, labels=np.unique(labels), average="macro", zero_division=0))
    raise InvalidConfig(f"unknown metric {metric!r}")


def mean_and_std(scores: Sequence[float]) -> Tuple[float, float]:
    """Mean and sample standard deviation (0 for a single score)"""
    values = np.asarray(scores, dtype=np.float64)
    std = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return float(np.mean(values)), std


# ----------------------------------------------------------------------------
# search
# ----------------------------------------------------------------------------

def grid_search(
    train: TrainingSet,
    plan: CvPlan,
    method: Method = "nszsl",
    base_config: Optional[MethodConfig] = None,
    jobs: int = 1,
    vocab_hash: Optional[str] = None
) -> CvResult:
    """
    Select (param1, param2) on the seen classes and retrain at the best cell.

    A cell whose fit fails on any fold scores -inf and is listed under
    failures. Ties go to the lexicographically smallest (param1, param2).

    Args:
        train: All seen-class data
        plan: Folds, grid and validation metric
        method: "nszsl" searches (lambda1, lambda2); "eszsl" (gamma, lambda)
        base_config: Values for everything not searched (seed included)
        jobs: Worker threads for the cell x fold fits
        vocab_hash: Recorded on the final model

    Returns:
        CvResult with final_model set
    """
    start_time = time.time()
    values = plan.grid_values()
    cells = [(p1, p2) for p1 in values for p2 in values]
    zsl_logger.log_component_start(
        "grid_search",
        method=method,
        num_cells=len(cells),
        num_folds=plan.num_folds,
        metric=plan.metric,
        jobs=jobs,
    )

    folds = []
    for f in range(plan.num_folds):
        train_classes, val_classes = split_classes(train.class_ids, plan, f)
        folds.append(fold_datasets(train, train_classes, val_classes))

    tracker = RunTracker("grid_search")
    width = len(str(len(cells)))
    tasks = []
    for i, (p1, p2) in enumerate(cells):
        for f in range(plan.num_folds):
            task_id = tracker.create_task(f"cell={i:0{width}d}/fold={f}", {"param1": p1, "param2": p2, "fold": f})
            tasks.append((task_id, i, f))

    def _run(task) -> Optional[float]:
        task_id, i, f = task
        fold_train, fold_val = folds[f]
        try:
            config = cell_config(method, base_config, *cells[i])
            model = fit_method(method, fold_train, config)
            score = evaluate(model, fold_val.x, fold_val.labels, fold_val.z, plan.metric)
        except Exception as e:
            tracker.fail_task(task_id, translate_error(e))
            return None
        tracker.complete_task(task_id, score)
        return score

    fold_scores = run_ordered(_run, tasks, jobs)

    table: List[CvCell] = []
    for i, (p1, p2) in enumerate(cells):
        scores = fold_scores[i * plan.num_folds:(i + 1) * plan.num_folds]
        failed = any(s is None for s in scores)
        table.append(CvCell(
            param1=p1,
            param2=p2,
            mean_accuracy=None if failed else float(np.mean(scores)),
            fold_accuracies=scores,
            status="failed" if failed else "completed",
        ))
        zsl_logger.logger.debug(
            f"Cell {i}: ({p1:g}, {p2:g}) -> {table[-1].score:.4f}",
            extra={"cell": i, "param1": p1, "param2": p2, "status": table[-1].status}
        )

    best = 0
    for i, cell in enumerate(table):
        if cell.score > table[best].score:
            best = i
    if table[best].mean_accuracy is None:
        raise AllCellsFailed(f"every grid cell failed; first failure: {tracker.failed_tasks()[0]['error']}")

    chosen = table[best]
    zsl_logger.logger.info(
        f"✅ Selected {PARAM_NAMES[method][0]}={chosen.param1:g}, {PARAM_NAMES[method][1]}={chosen.param2:g}",
        extra={"mean_accuracy": chosen.mean_accuracy, "status_counts": tracker.summary()}
    )

    final_model = fit_method(
        method, train, cell_config(method, base_config, chosen.param1, chosen.param2), vocab_hash
    )

    zsl_logger.log_component_complete(
        "grid_search",
        time.time() - start_time,
        best_accuracy=chosen.mean_accuracy,
        failed_tasks=len(tracker.failed_tasks()),
    )
    return CvResult(
        method=method,
        param_names=PARAM_NAMES[method],
        best_param1=chosen.param1,
        best_param2=chosen.param2,
        best_accuracy=chosen.mean_accuracy,
        cells=table,
        failures=tracker.failed_tasks(),
        plan=plan,
        final_model=final_model,
    )


def run_trials(
    seen: TrainingSet,
    unseen: LabeledSet,
    plan: CvPlan,
    method: Method = "nszsl",
    base_config: Optional[MethodConfig] = None,
    jobs: int = 1,
    vocab_hash: Optional[str] = None
) -> TrialReport:
    """
    Repeat search + retrain + unseen evaluation plan.num_trials times.

    Trial t shifts both the fold seed and the solver seed by t, so trial 0
    reproduces a plain grid_search with the given seeds.
    """
    base = base_config if base_config is not None else default_config(method)
    results: List[CvResult] = []
    scores: List[float] = []
    for t in range(plan.num_trials):
        trial_plan = plan.model_copy(update={"seed": plan.seed + t})
        trial_config = base.model_copy(update={"seed": base.seed + t}) if method == "nszsl" else base
        result = grid_search(seen, trial_plan, method, trial_config, jobs, vocab_hash)
        score = evaluate(result.final_model, unseen.x, unseen.labels, unseen.z, plan.metric)
        zsl_logger.logger.info(
            f"🎯 Trial {t + 1}/{plan.num_trials}: unseen {plan.metric} = {score:.4f}",
            extra={"trial": t, "score": score}
        )
        results.append(result)
        scores.append(score)

    mean, std = mean_and_std(scores)
    return TrialReport(method=method, metric=plan.metric, scores=scores, mean=mean, std=std, trials=results)
