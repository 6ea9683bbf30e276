"""
Tuning-parameter selection by stratified K-fold cross-validation.

Each (lambda1, lambda2, Q) grid point is fitted on K-1 folds and scored by
the held-out Gaussian log-likelihood; the best average wins.
"""

import itertools
import time
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, field_validator

from config import TUNING_CONFIG
from estimators.crf import crf_fit
from estimators.model_core import ClassDataset, PenaltyConfig, PrecisionLike, as_stack, logdet_pd
from estimators.pcen import pcen_fit
from shared.utils.error_handling import (
    ClusterFuseError,
    DegenerateClassError,
    DimensionMismatchError,
    ErrorRecoveryManager,
    ParameterError,
)
from shared.utils.logging import get_logger
from shared.utils.seeding import make_rng, seed_sequence

logger = get_logger("tuning")

FITTERS = {"crf": crf_fit, "pcen": pcen_fit}


class TuningGrid(BaseModel):
    """Candidate (lambda1, lambda2, Q) values and the fold setup."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    lambda1_values: List[float] = Field(min_length=1)
    lambda2_values: List[float] = Field(min_length=1)
    Q_values: List[int] = Field(min_length=1)
    folds: int = Field(default=TUNING_CONFIG["folds"], ge=2)
    rng_seed: int = 0

    @field_validator("lambda1_values")
    @classmethod
    def _positive(cls, values):
        if any(v <= 0 for v in values):
            raise ValueError("lambda1 values must be > 0")
        return values

    @field_validator("lambda2_values")
    @classmethod
    def _nonnegative(cls, values):
        if any(v < 0 for v in values):
            raise ValueError("lambda2 values must be >= 0")
        return values

    @field_validator("Q_values")
    @classmethod
    def _at_least_one(cls, values):
        if any(q < 1 for q in values):
            raise ValueError("Q values must be >= 1")
        return values

    @classmethod
    def from_grid_file(cls, document: Dict, folds: Optional[int] = None, rng_seed: int = 0) -> "TuningGrid":
        """Build from the ``{lambda1: [...], lambda2: [...], q: [...]}`` grid file layout."""
        fields = {
            "lambda1_values": document.get("lambda1"),
            "lambda2_values": document.get("lambda2"),
            "Q_values": document.get("q"),
            "rng_seed": rng_seed,
        }
        if folds is not None:
            fields["folds"] = folds
        return cls(**fields)

    def points(self) -> List[Tuple[float, float, int]]:
        """Grid points in lexicographic (lambda1, lambda2, Q) order."""
        return list(itertools.product(sorted(self.lambda1_values), sorted(self.lambda2_values),
                                      sorted(self.Q_values)))


@dataclass(frozen=True, eq=False)
class HoldoutStatistics:
    """Held-out class sizes and covariances centred at training means; empty classes allowed."""
    n: np.ndarray
    covariances: np.ndarray

    @property
    def C(self) -> int:
        return int(self.covariances.shape[0])


class ValidationResult(NamedTuple):
    score: float
    missing_classes: Tuple[int, ...]


def stratified_folds(y: Sequence, folds: int, rng: np.random.Generator) -> np.ndarray:
    """Fold index per row; each class is shuffled and dealt round-robin over the folds."""
    y = np.asarray(y)
    assignment = np.empty(y.shape[0], dtype=np.int64)
    for label in sorted(set(y.tolist())):
        rows = rng.permutation(np.flatnonzero(y == label))
        assignment[rows] = np.arange(rows.shape[0]) % folds
    return assignment


def holdout_statistics(X: np.ndarray, y: Sequence, train_means: np.ndarray,
                       classes: Sequence) -> HoldoutStatistics:
    """Per-class held-out covariance about the training-fold mean."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if train_means.shape != (len(classes), X.shape[1]):
        raise DimensionMismatchError(f"means {train_means.shape} for {len(classes)} classes, p={X.shape[1]}")
    p = X.shape[1]
    n = np.zeros(len(classes), dtype=np.int64)
    covs = np.zeros((len(classes), p, p))
    for c, label in enumerate(classes):
        rows = X[y == label]
        if rows.shape[0] == 0:
            continue
        centred = rows - train_means[c]
        n[c] = rows.shape[0]
        covs[c] = centred.T @ centred / rows.shape[0]
    return HoldoutStatistics(n, covs)


def validation_loglik(omegas: PrecisionLike, holdout: HoldoutStatistics) -> ValidationResult:
    """-1/2 sum_c n_c {tr(S_c Omega_c) - logdet Omega_c} over the held-out classes.

    A class without held-out rows contributes 0 and is listed in ``missing_classes``.
    """
    stack = as_stack(omegas)
    if stack.shape[0] != holdout.C or stack.shape[1:] != holdout.covariances.shape[1:]:
        raise DimensionMismatchError(f"precisions {stack.shape} vs holdout {holdout.covariances.shape}")
    total = 0.0
    missing = []
    for c in range(holdout.C):
        if holdout.n[c] == 0:
            missing.append(c)
            continue
        total += holdout.n[c] * (float(np.sum(holdout.covariances[c] * stack[c])) - logdet_pd(stack[c]))
    if missing:
        logger.warning("Held-out fold has no rows for some classes", missing_classes=missing)
    return ValidationResult(-0.5 * total, tuple(missing))


class _FoldOutcome(NamedTuple):
    point: int
    fold: int
    score: float
    error: Optional[ClusterFuseError]


def _fold_score(X: np.ndarray, y: np.ndarray, classes: Sequence, fold_ids: np.ndarray,
                fold: int, point: int, cfg: PenaltyConfig, method: str, seed) -> _FoldOutcome:
    train, held = fold_ids != fold, fold_ids == fold
    try:
        data = ClassDataset.from_rows(X[train], y[train], classes)
        fit = FITTERS[method](data, cfg, rng_seed=seed)
        holdout = holdout_statistics(X[held], y[held], data.means, classes)
        return _FoldOutcome(point, fold, validation_loglik(fit.precisions, holdout).score, None)
    except ClusterFuseError as e:
        return _FoldOutcome(point, fold, -np.inf, e)


def cv_select(X: np.ndarray, y: Sequence, grid: TuningGrid, method: str,
              base: Optional[PenaltyConfig] = None, n_jobs: int = 1,
              recovery: Optional[ErrorRecoveryManager] = None) -> Tuple[PenaltyConfig, pd.DataFrame]:
    """Pick the grid point with the highest mean held-out log-likelihood.

    ``base`` supplies solver tolerances; its penalty values are overridden by
    each grid point. Failed fits score -inf and are recorded on ``recovery``.
    Ties go to the first point in grid order.

    Returns:
        The selected configuration and a table with one row per grid point.

    Raises:
        DegenerateClassError: a class has fewer rows than folds.
        ClusterFuseError: every grid point failed; the type of the first
            failure is kept, so its exit code carries through.
    """
    if method not in FITTERS:
        raise ParameterError(f"unknown method {method!r}; expected one of {sorted(FITTERS)}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DimensionMismatchError(f"{X.shape} observations for {y.shape[0]} labels")
    classes = sorted(set(y.tolist()))
    smallest = min(int(np.sum(y == label)) for label in classes)
    if grid.folds > smallest:
        raise DegenerateClassError(f"{grid.folds} folds need every class to have at least "
                                   f"{grid.folds} rows; smallest class has {smallest}")

    started = time.perf_counter()
    recovery = recovery or ErrorRecoveryManager("tuning")
    base = base or PenaltyConfig(lambda1=1.0, lambda2=0.0, Q=1)
    fold_ids = stratified_folds(y, grid.folds, make_rng(grid.rng_seed, 0))
    points = grid.points()
    configs = [base.model_copy(update={"lambda1": l1, "lambda2": l2, "Q": q, "n_jobs": 1})
               for l1, l2, q in points]

    jobs = [(i, k) for i in range(len(points)) for k in range(grid.folds)]
    if n_jobs > 1:
        outcomes = Parallel(n_jobs=n_jobs)(
            delayed(_fold_score)(X, y, classes, fold_ids, k, i, configs[i], method,
                                 seed_sequence(grid.rng_seed, 1, i, k))
            for i, k in jobs
        )
    else:
        outcomes = [_fold_score(X, y, classes, fold_ids, k, i, configs[i], method,
                                seed_sequence(grid.rng_seed, 1, i, k))
                    for i, k in jobs]

    scores = np.zeros((len(points), grid.folds))
    errors: Dict[int, str] = {}
    for outcome in outcomes:
        scores[outcome.point, outcome.fold] = outcome.score
        if outcome.error is not None:
            l1, l2, q = points[outcome.point]
            recovery.handle_error(outcome.error, {"lambda1": l1, "lambda2": l2, "Q": q, "fold": outcome.fold})
            errors.setdefault(outcome.point, type(outcome.error).__name__)

    table = pd.DataFrame({
        "lambda1": [l1 for l1, _, _ in points],
        "lambda2": [l2 for _, l2, _ in points],
        "Q": [q for _, _, q in points],
        "score": [-np.inf if i in errors else float(np.mean(scores[i])) for i in range(len(points))],
        "failed": [i in errors for i in range(len(points))],
        "error": [errors.get(i, "") for i in range(len(points))],
    })
    if table["failed"].all():
        first = next(outcome.error for outcome in outcomes if outcome.error is not None)
        raise type(first)(f"every one of the {len(points)} grid points failed cross-validation; "
                          f"first failure: {first}") from first
    best = int(np.argmax(table["score"].to_numpy()))
    logger.performance_log("cv_select", time.perf_counter() - started, method=method,
                           grid_points=len(points), folds=grid.folds, failures=len(errors))
    return configs[best], table
