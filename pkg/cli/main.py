"""
Command-line interface for clusterfuse.

Subcommands:
    estimate      fit CRF or PCEN on a labeled CSV and write the model JSON
    tune          cross-validate a (lambda1, lambda2, Q) grid and write the score table
    simulate      run replications of a simulation scenario and write tidy results
    qda train     fit a QDA rule on CRF, PCEN or ridge precision estimates
    qda predict   classify observations with a saved model
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

from classifier.qda import QdaModel, classification_error, fit_qda, predict_indices
from config import RUNTIME_CONFIG, SIMULATION_CONFIG, TUNING_CONFIG, get_all_config
from estimators.alternation import FitResult
from estimators.model_core import PenaltyConfig, metric_nonzero_count
from selection.tuning import TuningGrid, cv_select
from shared.utils.error_handling import (
    EXIT_NOT_CONVERGED,
    EXIT_OK,
    ClusterFuseError,
    ErrorRecoveryManager,
    ParameterError,
    exit_code_for,
    with_error_handling,
)
from shared.utils.logging import get_logger
from simulation.experiments import ExperimentConfig, run_experiment
from simulation.simgen import Scenario, ScenarioName
from .io import (
    ModelDocument,
    read_grid_file,
    read_labeled_csv,
    read_model,
    read_observations,
    write_frame,
    write_model,
    write_predictions,
)

logger = get_logger("cli")

ESTIMATE_METHODS = ("crf", "pcen")
QDA_FIT_METHODS = ("crf", "pcen", "ridge")


def _add_data_args(parser: argparse.ArgumentParser):
    parser.add_argument("--input", required=True, type=Path, help="CSV file, one observation per row.")
    parser.add_argument("--label-col", default="-1",
                        help="Label column index (negative counts from the end) or header name. Default: last.")
    parser.add_argument("--header", action="store_true", help="The first CSV row is a header.")


def _add_penalty_args(parser: argparse.ArgumentParser):
    parser.add_argument("--lambda1", type=float, nargs="+", help="Ridge or L1 weight(s).")
    parser.add_argument("--lambda2", type=float, nargs="+", help="Fusion weight(s).")
    parser.add_argument("--q", type=int, nargs="+", help="Number(s) of clusters.")
    parser.add_argument("--grid-file", type=Path, help="JSON grid {lambda1: [...], lambda2: [...], q: [...]}.")
    parser.add_argument("--folds", type=int, default=TUNING_CONFIG["folds"],
                        help="Cross-validation folds when more than one grid point is given.")


def _add_runtime_args(parser: argparse.ArgumentParser):
    parser.add_argument("--seed", type=int, default=0, help="Seed for every random stream.")
    parser.add_argument("--workers", type=int, default=RUNTIME_CONFIG["workers"],
                        help="Parallel jobs (default from CLUSTERFUSE_WORKERS).")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clusterfuse",
                                     description="Joint estimation of clustered Gaussian precision matrices.")
    commands = parser.add_subparsers(dest="command", required=True)

    estimate = commands.add_parser("estimate", help="Fit CRF or PCEN and write the model JSON.")
    _add_data_args(estimate)
    _add_penalty_args(estimate)
    _add_runtime_args(estimate)
    estimate.add_argument("--method", choices=ESTIMATE_METHODS, default="pcen")
    estimate.add_argument("--output", required=True, type=Path, help="Model JSON path.")
    estimate.set_defaults(handler=cmd_estimate)

    tune = commands.add_parser("tune", help="Cross-validate a tuning grid.")
    _add_data_args(tune)
    _add_penalty_args(tune)
    _add_runtime_args(tune)
    tune.add_argument("--method", choices=ESTIMATE_METHODS, default="pcen")
    tune.add_argument("--output", required=True, type=Path, help="Score table CSV path.")
    tune.set_defaults(handler=cmd_tune)

    simulate = commands.add_parser("simulate", help="Run a simulation study.")
    _add_penalty_args(simulate)
    _add_runtime_args(simulate)
    simulate.add_argument("--scenario", required=True, help=f"One of {[s.value for s in ScenarioName]}.")
    simulate.add_argument("--p", type=int, required=True, help="Dimension.")
    simulate.add_argument("--n", type=int, required=True, help="Training observations per class.")
    simulate.add_argument("--rho", type=float, help="Tridiagonal correlation for qda_dense.")
    simulate.add_argument("--reps", type=int, default=1, help="Replications.")
    simulate.add_argument("--n-test", type=int, default=SIMULATION_CONFIG["qda_test_per_class"],
                          help="Test observations per class for qda_dense.")
    simulate.add_argument("--tune", action="store_true",
                          help="Select the grid point by cross-validation in every replication.")
    simulate.add_argument("--output", required=True, type=Path,
                          help="Per-replication CSV; the summary goes next to it with a _summary suffix.")
    simulate.set_defaults(handler=cmd_simulate)

    qda = commands.add_parser("qda", help="Quadratic discriminant analysis.")
    qda_commands = qda.add_subparsers(dest="qda_command", required=True)

    train = qda_commands.add_parser("train", help="Fit and save a QDA model.")
    _add_data_args(train)
    _add_penalty_args(train)
    _add_runtime_args(train)
    train.add_argument("--method", choices=QDA_FIT_METHODS, default="crf")
    train.add_argument("--uniform-priors", action="store_true", help="Use 1/C priors instead of n_c/n.")
    train.add_argument("--output", required=True, type=Path, help="Model JSON path.")
    train.set_defaults(handler=cmd_qda_train)

    predict = qda_commands.add_parser("predict", help="Classify observations with a saved model.")
    _add_data_args(predict)
    predict.add_argument("--model", required=True, type=Path, help="Model JSON written by qda train or estimate.")
    predict.add_argument("--output", required=True, type=Path, help="Predictions CSV path.")
    predict.set_defaults(handler=cmd_qda_predict)
    return parser


def grid_from_args(args: argparse.Namespace) -> TuningGrid:
    """The tuning grid from --grid-file or the penalty flags."""
    if args.grid_file is not None:
        return TuningGrid.from_grid_file(read_grid_file(args.grid_file), folds=args.folds, rng_seed=args.seed)
    missing = [flag for flag, values in (("--lambda1", args.lambda1), ("--lambda2", args.lambda2),
                                         ("--q", args.q)) if not values]
    if missing:
        raise ParameterError(f"missing {', '.join(missing)} (or give --grid-file)")
    return TuningGrid(lambda1_values=args.lambda1, lambda2_values=args.lambda2, Q_values=args.q,
                      folds=args.folds, rng_seed=args.seed)


def _select_penalty(X: np.ndarray, y: np.ndarray, args: argparse.Namespace, method: str) -> PenaltyConfig:
    """The single grid point, or the cross-validated one when the grid has several."""
    grid = grid_from_args(args)
    if method == "ridge":
        grid = grid.model_copy(update={"lambda2_values": [0.0], "Q_values": [1]})
    points = grid.points()
    base = PenaltyConfig(lambda1=points[0][0], lambda2=points[0][1], Q=points[0][2], n_jobs=args.workers)
    if len(points) == 1:
        return base
    cfg, _ = cv_select(X, y, grid, "pcen" if method == "pcen" else "crf", base=base, n_jobs=args.workers)
    logger.info("Tuning parameters selected", lambda1=cfg.lambda1, lambda2=cfg.lambda2, Q=cfg.Q)
    return cfg.model_copy(update={"n_jobs": args.workers})


def _fit_summary(doc: ModelDocument, model: QdaModel, fit: FitResult) -> List[str]:
    report = fit.report
    return [
        f"method: {doc.method}",
        f"classes: {', '.join(doc.classes)}",
        f"lambda1: {doc.lambda1!r}  lambda2: {doc.lambda2!r}  Q: {doc.Q}",
        f"partition: {' '.join(str(label) for label in doc.partition)}",
        "nonzeros per class: " + " ".join(str(metric_nonzero_count(omega)) for omega in model.omegas.omegas),
        f"outer rounds: {report.rounds}  converged: {report.converged}",
        "objective trace: " + " ".join(f"{value:.10g}" for value in report.objective_trace),
    ]


def _finish_fit(doc: ModelDocument, model: QdaModel, fit: FitResult, output: Path) -> int:
    write_model(output, doc)
    print("\n".join(_fit_summary(doc, model, fit)))
    if not fit.report.converged:
        logger.warning("Solver did not converge; model written with converged=false", output=str(output))
        print("warning: solver did not converge", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _fit_and_write(args: argparse.Namespace, method: str, uniform_priors: bool = False) -> int:
    X, y = read_labeled_csv(args.input, args.label_col, args.header)
    cfg = _select_penalty(X, y, args, method)
    model, fit = fit_qda(X, y, method, cfg, rng_seed=args.seed, uniform_priors=uniform_priors)
    if method == "ridge":
        cfg = cfg.model_copy(update={"lambda2": 0.0, "Q": 1})
    return _finish_fit(ModelDocument.from_fit(method, cfg, model, fit), model, fit, args.output)


@with_error_handling("cli")
def cmd_estimate(args: argparse.Namespace) -> int:
    return _fit_and_write(args, args.method)


@with_error_handling("cli")
def cmd_qda_train(args: argparse.Namespace) -> int:
    return _fit_and_write(args, args.method, uniform_priors=args.uniform_priors)


@with_error_handling("cli")
def cmd_tune(args: argparse.Namespace) -> int:
    X, y = read_labeled_csv(args.input, args.label_col, args.header)
    grid = grid_from_args(args)
    recovery = ErrorRecoveryManager("cli_tune")
    cfg, table = cv_select(X, y, grid, args.method, n_jobs=args.workers, recovery=recovery)
    write_frame(args.output, table)
    print(f"selected: lambda1={cfg.lambda1!r} lambda2={cfg.lambda2!r} Q={cfg.Q}")
    failures = recovery.get_error_statistics()["total_errors"]
    if failures:
        print(f"warning: {failures} fold fits failed and scored -inf", file=sys.stderr)
    return EXIT_OK


def summary_path(output: Path) -> Path:
    return output.with_name(f"{output.stem}_summary{output.suffix or '.csv'}")


@with_error_handling("cli")
def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        name = ScenarioName(args.scenario)
    except ValueError:
        raise ParameterError(f"unknown scenario {args.scenario!r}; expected one of "
                             f"{[s.value for s in ScenarioName]}") from None
    scenario = Scenario(name=name, p=args.p, n_per_class=args.n, rho=args.rho, rng_seed=args.seed)
    cfg = ExperimentConfig(scenario=scenario, grid=grid_from_args(args), reps=args.reps,
                           n_test_per_class=args.n_test, tune=args.tune, workers=args.workers)
    recovery = ErrorRecoveryManager("cli_simulate")
    results, summary = run_experiment(cfg, recovery)
    write_frame(args.output, results)
    write_frame(summary_path(args.output), summary)
    failures = recovery.get_error_statistics()["total_errors"]
    print(f"{len(results)} result rows written to {args.output}")
    if failures:
        print(f"warning: {failures} fits failed and were reported as NaN", file=sys.stderr)
    return EXIT_OK


@with_error_handling("cli")
def cmd_qda_predict(args: argparse.Namespace) -> int:
    model = read_model(args.model).to_qda()
    X, y = read_observations(args.input, model.p, args.label_col, args.header)
    indices = predict_indices(model, X)
    predicted = [model.classes[i] for i in indices]
    write_predictions(args.output, predicted, y)
    if y is not None:
        error = classification_error(model, X, y, predicted=indices)
        wrong = int(round(error * len(y)))
        print(f"error rate: {error!r} ({wrong}/{len(y)})")
    print(f"{len(predicted)} predictions written to {args.output}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logger.debug("Starting command", command=args.command, config=get_all_config())
    try:
        return args.handler(args)
    except ValidationError as e:
        error: ClusterFuseError = ParameterError(str(e))
    except ClusterFuseError as e:
        error = e
    logger.error("Command failed", command=args.command, error_type=type(error).__name__, error=str(error))
    print(f"error: {error}", file=sys.stderr)
    return exit_code_for(error)
