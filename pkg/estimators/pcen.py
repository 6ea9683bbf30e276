"""
Precision cluster elastic net (PCEN) estimator.
Block subproblems are elastic-net precision problems solved with GEN-ISTA.
"""

from typing import Optional

import numpy as np

from shared.utils.error_handling import NumericError
from shared.utils.logging import get_logger
from shared.utils.seeding import SeedLike
from .alternation import (
    BlockUpdate,
    ClusterSolve,
    FitResult,
    InnerSolveResult,
    blockwise_descent,
    fit_alternating,
    inner_solve,
)
from .gen_ista import GenIstaConfig, gen_ista_solve
from .model_core import (
    ClassDataset,
    Partition,
    PenaltyConfig,
    initial_precisions,
    pcen_objective,
)

logger = get_logger("pcen")


def pcen_block_gammas(cfg: PenaltyConfig, n_c: int, card: int):
    """(gamma1, gamma2) = (lambda1 / n_c, lambda2 (card-1) / (2 n_c card))."""
    gamma1 = cfg.lambda1 / n_c
    gamma2 = cfg.lambda2 * (card - 1) / (2.0 * n_c * card)
    return gamma1, gamma2


def pcen_cluster_solve(data: ClassDataset, start: np.ndarray, members: np.ndarray,
                       cfg: PenaltyConfig) -> ClusterSolve:
    def update(c: int, S_tilde: np.ndarray, current: np.ndarray, card: int) -> BlockUpdate:
        gamma1, gamma2 = pcen_block_gammas(cfg, data.n[c], card)
        ista_cfg = GenIstaConfig(gamma1=gamma1, gamma2=gamma2, eps=cfg.ista_eps,
                                 grad_tol=cfg.ista_grad_tol, max_iter=cfg.ista_max_iter)
        try:
            result = gen_ista_solve(S_tilde, ista_cfg, omega0=current)
        except NumericError as e:
            logger.warning("GEN-ISTA failed on block", class_index=c, error=str(e))
            return BlockUpdate(current, failed=True)
        if not result.converged:
            logger.debug("GEN-ISTA hit its iteration cap", class_index=c,
                         iterations=result.iterations)
        return BlockUpdate(result.omega, tuple(result.steps_used), converged=result.converged)

    return blockwise_descent(data, start, members, cfg, "l1", update)


def pcen_inner_solve(data: ClassDataset, part: Partition, cfg: PenaltyConfig,
                     omegas0: Optional[np.ndarray] = None) -> InnerSolveResult:
    """Sparse fusion precision update for a fixed partition, warm-started blockwise."""
    cfg.require_fit_ready(data.C)
    start = initial_precisions(data) if omegas0 is None else np.array(omegas0, dtype=float)
    return inner_solve(data, part, cfg, start, pcen_cluster_solve)


def pcen_fit(data: ClassDataset, cfg: PenaltyConfig, rng_seed: SeedLike = 0) -> FitResult:
    """Jointly estimate the partition and sparse precision matrices."""
    return fit_alternating(data, cfg, rng_seed, pcen_cluster_solve, pcen_objective, "pcen")
