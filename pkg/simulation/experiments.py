"""
Replication driver for the simulation studies.

Runs R replications of a scenario over a (lambda1, lambda2, Q) grid, or with
per-replication cross-validated tuning, and collects tidy per-replication
metrics plus their mean and standard error.
"""

import time
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field

from classifier.qda import QdaModel, classification_error, log_priors_from_counts
from config import RUNTIME_CONFIG, SIMULATION_CONFIG
from estimators.alternation import FitResult
from estimators.crf import crf_fit
from estimators.model_core import (
    ClassDataset,
    PrecisionSet,
    PenaltyConfig,
    metric_frob_error,
    metric_nonzero_count,
    metric_stp,
    metric_tpr,
)
from estimators.pcen import pcen_fit
from selection.tuning import TuningGrid, cv_select
from shared.utils.error_handling import ClusterFuseError, ErrorRecoveryManager
from shared.utils.logging import get_logger
from shared.utils.seeding import derive_seed, make_rng, seed_sequence
from .simgen import GroundTruth, Scenario, ScenarioName, as_labeled_rows, make_scenario, sample_classes

logger = get_logger("experiments")

GGM_METHODS = ("pcen", "separate")
QDA_METHODS = ("crf", "rf", "ridge", "oracle", "tc")
GGM_METRICS = ("stp", "tpr", "nonzero_count", "frob_error", "log_frob_error", "partition_recovered")
QDA_METRICS = ("error_rate", "stp", "tpr", "frob_error")
RESULT_COLUMNS = ["scenario", "method", "lambda1", "lambda2", "Q", "rep", "metric", "value"]
GROUP_KEYS = ["method", "lambda1", "lambda2", "Q", "metric"]

# method -> (fitter, keeps lambda2, keeps Q)
FITTED_METHODS: Dict[str, Tuple[Callable[..., FitResult], bool, bool]] = {
    "pcen": (pcen_fit, True, True),
    "separate": (pcen_fit, False, False),
    "crf": (crf_fit, True, True),
    "rf": (crf_fit, True, False),
    "ridge": (crf_fit, False, False),
}


class ExperimentConfig(BaseModel):
    """Scenario, grid and replication settings for one simulation run."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    scenario: Scenario
    grid: TuningGrid
    reps: int = Field(ge=1)
    n_test_per_class: int = Field(default=SIMULATION_CONFIG["qda_test_per_class"], ge=1)
    tune: bool = False
    workers: int = Field(default=RUNTIME_CONFIG["workers"], ge=1)

    @property
    def is_qda(self) -> bool:
        return self.scenario.name == ScenarioName.QDA_DENSE

    @property
    def methods(self) -> Tuple[str, ...]:
        return QDA_METHODS if self.is_qda else GGM_METHODS

    @property
    def metrics(self) -> Tuple[str, ...]:
        return QDA_METRICS if self.is_qda else GGM_METRICS


class ReplicationOutcome(NamedTuple):
    rows: List[dict]
    failures: List[Tuple[ClusterFuseError, dict]]


def method_penalty(method: str, lambda1: float, lambda2: float, Q: int) -> Tuple[float, float, int]:
    """The (lambda1, lambda2, Q) a method actually fits at a grid point."""
    _, keeps_lambda2, keeps_q = FITTED_METHODS[method]
    return lambda1, lambda2 if keeps_lambda2 else 0.0, Q if keeps_q else 1


def method_grid(grid: TuningGrid, method: str) -> TuningGrid:
    """The part of the grid a method can distinguish."""
    _, keeps_lambda2, keeps_q = FITTED_METHODS[method]
    update = {}
    if not keeps_lambda2:
        update["lambda2_values"] = [0.0]
    if not keeps_q:
        update["Q_values"] = [1]
    return grid.model_copy(update=update)


def fitter_name(method: str) -> str:
    return "pcen" if FITTED_METHODS[method][0] is pcen_fit else "crf"


def _estimation_metrics(truth: GroundTruth, omegas: np.ndarray,
                        fit: Optional[FitResult] = None) -> Dict[str, float]:
    frob = metric_frob_error(truth.omegas_true, omegas)
    return {
        "stp": float(metric_stp(truth.omegas_true, omegas)),
        "tpr": metric_tpr(truth.omegas_true, omegas),
        "nonzero_count": float(metric_nonzero_count(omegas)),
        "frob_error": frob,
        "log_frob_error": float(np.log(frob)) if frob > 0 else -np.inf,
        "partition_recovered": float(fit.partition.same_as(truth.partition_true)) if fit else np.nan,
    }


def _qda_error(omegas: np.ndarray, mus: np.ndarray, data: ClassDataset,
               test: Tuple[np.ndarray, np.ndarray]) -> float:
    model = QdaModel(PrecisionSet(omegas), mus, log_priors_from_counts(data.n))
    return classification_error(model, *test)


def _rows(cfg: ExperimentConfig, method: str, penalty: Tuple[float, float, int], rep: int,
          values: Dict[str, float]) -> List[dict]:
    lambda1, lambda2, Q = penalty
    return [{"scenario": cfg.scenario.name.value, "method": method, "lambda1": lambda1, "lambda2": lambda2,
             "Q": Q, "rep": rep, "metric": metric, "value": float(values.get(metric, np.nan))}
            for metric in cfg.metrics]


def run_replication(cfg: ExperimentConfig, rep: int) -> ReplicationOutcome:
    """All methods and grid points for one replication of the scenario.

    Fits are shared between methods that reduce to the same penalty, and a
    failed fit leaves NaN metrics plus an entry in ``failures``.
    """
    seed = cfg.scenario.rng_seed
    truth, train = make_scenario(cfg.scenario, rep)
    X, y = as_labeled_rows(train)
    data = ClassDataset.from_rows(X, y)
    test = None
    if cfg.is_qda:
        test = as_labeled_rows(sample_classes(truth, cfg.n_test_per_class, make_rng(seed, rep, 2)))

    rows: List[dict] = []
    failures: List[Tuple[ClusterFuseError, dict]] = []
    fits: Dict[tuple, Optional[FitResult]] = {}

    def fit_once(method: str, penalty: Tuple[float, float, int], index: int) -> Optional[FitResult]:
        key = (fitter_name(method),) + penalty
        if key not in fits:
            lambda1, lambda2, Q = penalty
            try:
                fits[key] = FITTED_METHODS[method][0](
                    data, PenaltyConfig(lambda1=lambda1, lambda2=lambda2, Q=Q),
                    rng_seed=seed_sequence(seed, rep, 3, index))
            except ClusterFuseError as e:
                failures.append((e, {"rep": rep, "method": method, "lambda1": lambda1,
                                     "lambda2": lambda2, "Q": Q}))
                fits[key] = None
        return fits[key]

    def evaluate(method: str, penalty: Tuple[float, float, int], index: int) -> List[dict]:
        fit = fit_once(method, penalty, index)
        values: Dict[str, float] = {}
        if fit is not None:
            keeps_q = FITTED_METHODS[method][2]
            values = _estimation_metrics(truth, fit.precisions.omegas, fit if keeps_q else None)
            if cfg.is_qda:
                values["error_rate"] = _qda_error(fit.precisions.omegas, data.means, data, test)
        return _rows(cfg, method, penalty, rep, values)

    for method in cfg.methods:
        if method in ("oracle", "tc"):
            mus = truth.mus_true if method == "oracle" else data.means
            values = _estimation_metrics(truth, truth.omegas_true.omegas)
            values["error_rate"] = _qda_error(truth.omegas_true.omegas, mus, data, test)
            rows.extend(_rows(cfg, method, (np.nan, np.nan, 0), rep, values))
        elif cfg.tune:
            grid = method_grid(cfg.grid, method).model_copy(update={"rng_seed": derive_seed(make_rng(seed, rep, 4))})
            try:
                selected, _ = cv_select(X, y, grid, fitter_name(method))
            except ClusterFuseError as e:
                failures.append((e, {"rep": rep, "method": method, "stage": "tuning"}))
                rows.extend(_rows(cfg, method, (np.nan, np.nan, 0), rep, {}))
                continue
            rows.extend(evaluate(method, (selected.lambda1, selected.lambda2, selected.Q), 0))
        else:
            for index, point in enumerate(cfg.grid.points()):
                rows.extend(evaluate(method, method_penalty(method, *point), index))

    logger.debug("Replication finished", rep=rep, rows=len(rows), failures=len(failures))
    return ReplicationOutcome(rows, failures)


def summarize(results: pd.DataFrame) -> pd.DataFrame:
    """Mean, standard error and count per (method, lambda1, lambda2, Q, metric)."""
    grouped = results.groupby(GROUP_KEYS, dropna=False, sort=True)["value"]
    summary = grouped.agg(mean="mean", std="std", count="count").reset_index()
    summary["se"] = summary["std"] / np.sqrt(summary["count"])
    return summary[GROUP_KEYS + ["mean", "se", "count"]]


def run_experiment(cfg: ExperimentConfig,
                   recovery: Optional[ErrorRecoveryManager] = None) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Run every replication and return (tidy per-replication results, summary).

    Replications run in parallel when ``cfg.workers > 1``; results are
    ordered by replication, so the output does not depend on scheduling.
    """
    started = time.perf_counter()
    recovery = recovery or ErrorRecoveryManager("experiments")
    if cfg.workers > 1 and cfg.reps > 1:
        outcomes = Parallel(n_jobs=min(cfg.workers, cfg.reps))(
            delayed(run_replication)(cfg, rep) for rep in range(cfg.reps))
    else:
        outcomes = [run_replication(cfg, rep) for rep in range(cfg.reps)]

    rows = []
    for outcome in outcomes:
        rows.extend(outcome.rows)
        for error, context in outcome.failures:
            recovery.handle_error(error, context)
    results = pd.DataFrame(rows, columns=RESULT_COLUMNS)
    summary = summarize(results)
    logger.performance_log("simulate", time.perf_counter() - started, scenario=cfg.scenario.name.value,
                           reps=cfg.reps, rows=len(results), failures=len(recovery.error_history))
    return results, summary
