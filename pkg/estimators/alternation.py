"""
Outer alternation shared by the CRF and PCEN estimators.
Alternates the k-means partition step with the fixed-partition precision update.
"""

import time
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from shared.utils.logging import get_logger
from shared.utils.seeding import SeedLike, seed_sequence
from .clusterer import kmeans_partition, partition_objective
from .model_core import (
    ClassDataset,
    Partition,
    PenaltyConfig,
    PrecisionSet,
    SolverReport,
    cluster_objective,
    initial_precisions,
)

logger = get_logger("alternation")


@dataclass
class ClusterSolve:
    """Result of the blockwise sweep inside one cluster."""
    members: np.ndarray
    omegas: np.ndarray
    sweeps: int
    converged: bool
    objective_trace: List[float] = field(default_factory=list)
    steps: List[float] = field(default_factory=list)
    failed_class: Optional[int] = None
    aborted: bool = False


@dataclass
class InnerSolveResult:
    """Fixed-partition solve over all clusters."""
    precisions: PrecisionSet
    sweeps: int
    converged: bool
    failed_class: Optional[int] = None
    aborted: bool = False
    cluster_traces: List[List[float]] = field(default_factory=list)
    step_sizes: List[float] = field(default_factory=list)


class FitResult(NamedTuple):
    precisions: PrecisionSet
    partition: Partition
    report: SolverReport


class BlockUpdate(NamedTuple):
    """New Omega_c from one block update, with the step sizes it used."""
    omega: np.ndarray
    steps: Tuple[float, ...] = ()
    failed: bool = False
    converged: bool = True


ClusterSolver = Callable[[ClassDataset, np.ndarray, np.ndarray, PenaltyConfig], ClusterSolve]
Objective = Callable[[ClassDataset, np.ndarray, Partition, PenaltyConfig], float]


def relative_change(previous: float, current: float) -> float:
    return abs(previous - current) / (1.0 + abs(current))


def blockwise_descent(data: ClassDataset, start: np.ndarray, members: np.ndarray,
                      cfg: PenaltyConfig, penalty: str,
                      block_update: Callable[[int, np.ndarray, np.ndarray, int], BlockUpdate]) -> ClusterSolve:
    """Cyclic coordinate descent over the classes of one cluster, ascending class order.

    ``block_update(c, S_tilde, current, card)`` returns the new Omega_c (and
    optional diagnostics) given the fusion-shifted covariance.
    """
    card = len(members)
    omegas = start.copy()
    trace = [cluster_objective(data, omegas, members, cfg.lambda1, cfg.lambda2, penalty)]
    steps: List[float] = []
    single_pass = card == 1 or cfg.lambda2 == 0.0
    converged = False
    unconverged_class: Optional[int] = None
    sweeps = 0

    for sweep in range(1, cfg.inner_max_iter + 1):
        sweeps = sweep
        for k, c in enumerate(members):
            if card > 1 and cfg.lambda2 > 0.0:
                others = omegas.sum(axis=0) - omegas[k]
                S_tilde = data.covariances[c] - cfg.lambda2 / (data.n[c] * card) * others
            else:
                S_tilde = data.covariances[c]
            update = block_update(int(c), S_tilde, omegas[k], card)
            if update.failed:
                return ClusterSolve(members, omegas, sweeps, False, trace, steps,
                                    failed_class=int(c), aborted=True)
            omegas[k] = update.omega
            steps.extend(update.steps)
            if not update.converged and unconverged_class is None:
                unconverged_class = int(c)
        trace.append(cluster_objective(data, omegas, members, cfg.lambda1, cfg.lambda2, penalty))
        if single_pass or relative_change(trace[-2], trace[-1]) <= cfg.tol:
            converged = True
            break

    if unconverged_class is not None:
        return ClusterSolve(members, omegas, sweeps, False, trace, steps, failed_class=unconverged_class)
    return ClusterSolve(members, omegas, sweeps, converged, trace, steps)


def inner_solve(data: ClassDataset, part: Partition, cfg: PenaltyConfig,
                start: np.ndarray, cluster_solver: ClusterSolver) -> InnerSolveResult:
    """Run the per-cluster solver on every block, in parallel when cfg.n_jobs > 1."""
    blocks = part.blocks()
    jobs = [(members, start[members]) for members in blocks]
    if cfg.n_jobs > 1 and len(blocks) > 1:
        solves = Parallel(n_jobs=min(cfg.n_jobs, len(blocks)))(
            delayed(cluster_solver)(data, block_start, members, cfg) for members, block_start in jobs
        )
    else:
        solves = [cluster_solver(data, block_start, members, cfg) for members, block_start in jobs]

    omegas = start.copy()
    failed_class = None
    for solve in solves:
        omegas[solve.members] = solve.omegas
        if failed_class is None and solve.failed_class is not None:
            failed_class = solve.failed_class
    return InnerSolveResult(
        precisions=PrecisionSet(omegas),
        sweeps=max(solve.sweeps for solve in solves),
        converged=all(solve.converged for solve in solves),
        failed_class=failed_class,
        aborted=any(solve.aborted for solve in solves),
        cluster_traces=[solve.objective_trace for solve in solves],
        step_sizes=[t for solve in solves for t in solve.steps],
    )


def fit_alternating(data: ClassDataset, cfg: PenaltyConfig, rng_seed: SeedLike,
                    cluster_solver: ClusterSolver, objective: Objective, method: str) -> FitResult:
    """Alternate partition and precision updates until the partition repeats.

    The objective is recorded after every partition update and every
    precision update. A proposed partition that would raise the partition
    objective of the current estimates is rejected in favour of the current one.
    """
    cfg.require_fit_ready(data.C)
    started = time.perf_counter()
    omegas = initial_precisions(data)
    report = SolverReport()
    partition: Optional[Partition] = None

    for round_index in range(1, cfg.max_iter + 1):
        report.rounds = round_index
        proposal = kmeans_partition(omegas, cfg.Q, cfg.n_starts,
                                    rng_seed=seed_sequence(rng_seed, round_index)).partition
        if partition is not None and partition_objective(omegas, proposal) > partition_objective(omegas, partition):
            proposal = partition
        proposal = proposal.canonical()
        if partition is not None and proposal.same_as(partition):
            report.converged = True
            break

        partition = proposal
        report.partition_history.append(partition)
        report.objective_trace.append(objective(data, omegas, partition, cfg))

        inner = inner_solve(data, partition, cfg, omegas, cluster_solver)
        omegas = inner.precisions.omegas
        report.objective_trace.append(objective(data, omegas, partition, cfg))
        report.inner_sweeps.append(inner.sweeps)
        if inner.step_sizes:
            report.step_sizes.append(float(np.mean(inner.step_sizes)))
        if not inner.converged:
            report.inner_converged = False
            if report.failed_class is None:
                report.failed_class = inner.failed_class
            if inner.aborted:
                logger.warning("Block solve failed", method=method, failed_class=inner.failed_class,
                               round=round_index)
                break

        logger.solver_log(method, round=round_index, partition=list(partition.assignment),
                          objective=report.objective_trace[-1], inner_sweeps=inner.sweeps)

    report.converged = report.converged and report.inner_converged
    logger.performance_log(f"{method}_fit", time.perf_counter() - started,
                           rounds=report.rounds, converged=report.converged)
    return FitResult(PrecisionSet(omegas), partition, report)
