"""
Cluster ridge fusion (CRF) estimator.
"""

from typing import Optional

import numpy as np

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
from .model_core import (
    ClassDataset,
    Partition,
    PenaltyConfig,
    crf_objective,
    initial_precisions,
)
from .operators import ridge_precision_solve


def crf_block_eta(cfg: PenaltyConfig, n_c: int, card: int) -> float:
    """Ridge weight of the Omega_c block problem: (lambda1 + lambda2 (card-1)/card) / (2 n_c)."""
    return (cfg.lambda1 + cfg.lambda2 * (card - 1) / card) / (2.0 * n_c)


def crf_cluster_solve(data: ClassDataset, start: np.ndarray, members: np.ndarray,
                      cfg: PenaltyConfig) -> ClusterSolve:
    def update(c: int, S_tilde: np.ndarray, current: np.ndarray, card: int) -> BlockUpdate:
        return BlockUpdate(ridge_precision_solve(S_tilde, crf_block_eta(cfg, data.n[c], card)))

    return blockwise_descent(data, start, members, cfg, "ridge", update)


def crf_inner_solve(data: ClassDataset, part: Partition, cfg: PenaltyConfig,
                    omegas0: Optional[np.ndarray] = None) -> InnerSolveResult:
    """Ridge-fusion precision update for a fixed partition.

    Each block update is a closed-form ridge precision solve, so the
    objective cannot increase between sweeps.
    """
    cfg.require_fit_ready(data.C)
    start = initial_precisions(data) if omegas0 is None else np.array(omegas0, dtype=float)
    return inner_solve(data, part, cfg, start, crf_cluster_solve)


def crf_fit(data: ClassDataset, cfg: PenaltyConfig, rng_seed: SeedLike = 0) -> FitResult:
    """Jointly estimate the partition and the precision matrices with ridge penalties."""
    return fit_alternating(data, cfg, rng_seed, crf_cluster_solve, crf_objective, "crf")
