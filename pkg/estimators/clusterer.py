"""
Partition subproblem: k-means over vectorized precision matrices.
"""

from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple

import numpy as np
from scipy.special import stirling2

from config import CLUSTERING_CONFIG
from shared.utils.error_handling import ParameterError
from shared.utils.logging import get_logger
from shared.utils.seeding import SeedLike, spawn_rngs
from .model_core import Partition, PrecisionLike, as_stack, within_cluster_spread

logger = get_logger("clusterer")


@dataclass(frozen=True)
class KmeansResult:
    """Best partition found, its WCSS, and the winning restart (-1 for exact search)."""
    partition: Partition
    wcss: float
    start_index: int


def vectorize(omegas: PrecisionLike) -> np.ndarray:
    stack = as_stack(omegas)
    return stack.reshape(stack.shape[0], -1)


def _wcss(X: np.ndarray, labels: np.ndarray, Q: int) -> float:
    total = 0.0
    for q in range(Q):
        block = X[labels == q]
        if block.shape[0] > 1:
            centred = block - block.mean(axis=0)
            total += float(np.sum(centred * centred))
    return total


def partition_objective(omegas: PrecisionLike, part: Partition) -> float:
    """sum_q card_q^-1 sum_{c<m in D_q} ||Omega_c - Omega_m||_F^2, evaluated as a WCSS."""
    stack = as_stack(omegas)
    if stack.shape[0] != part.C:
        raise ParameterError(f"{stack.shape[0]} precisions for a partition of {part.C} classes")
    return sum(within_cluster_spread(stack, block) for block in part.blocks() if len(block) > 1)


def _check_q(C: int, Q: int):
    if not 1 <= Q <= C:
        raise ParameterError(f"Q must satisfy 1 <= Q <= C={C}, got {Q}")


def restricted_growth_strings(C: int, Q: int) -> Iterator[Tuple[int, ...]]:
    """Every partition of C items into exactly Q blocks, once each, as canonical labels."""
    labels = [0] * C

    def extend(i: int, used: int) -> Iterator[Tuple[int, ...]]:
        if i == C:
            if used == Q:
                yield tuple(labels)
            return
        # remaining positions must be able to open the missing blocks
        if Q - used > C - i:
            return
        for label in range(min(used + 1, Q)):
            labels[i] = label
            yield from extend(i + 1, max(used, label + 1))

    yield from extend(1, 1)


def exhaustive_partition(omegas: PrecisionLike, Q: int) -> KmeansResult:
    """Exact minimizer by enumeration; the first optimum in enumeration order wins."""
    X = vectorize(omegas)
    C = X.shape[0]
    _check_q(C, Q)
    best_labels, best_wcss = None, np.inf
    for labels in restricted_growth_strings(C, Q):
        value = _wcss(X, np.asarray(labels), Q)
        if value < best_wcss:
            best_labels, best_wcss = labels, value
    return KmeansResult(Partition(best_labels, Q), float(best_wcss), -1)


def kmeans_plusplus_init(X: np.ndarray, Q: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: each new centre drawn proportionally to squared distance."""
    n_samples = X.shape[0]
    centroids = np.empty((Q, X.shape[1]), dtype=X.dtype)
    centroids[0] = X[rng.integers(0, n_samples)]
    for i in range(1, Q):
        dist_sq = np.min(
            np.sum((X[:, None, :] - centroids[None, :i, :]) ** 2, axis=2),
            axis=1,
        )
        total = dist_sq.sum()
        if total > 0.0:
            next_idx = rng.choice(n_samples, p=dist_sq / total)
        else:
            next_idx = rng.integers(0, n_samples)
        centroids[i] = X[next_idx]
    return centroids


def _assign(X: np.ndarray, centroids: np.ndarray, current: Optional[np.ndarray]) -> np.ndarray:
    distances = np.sum((X[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
    labels = np.argmin(distances, axis=1)
    if current is not None:
        # ties keep the current label
        keep = distances[np.arange(X.shape[0]), current] <= distances[np.arange(X.shape[0]), labels]
        labels = np.where(keep, current, labels)
    return labels


def _repair_empty(X: np.ndarray, labels: np.ndarray, centroids: np.ndarray, Q: int) -> np.ndarray:
    labels = labels.copy()
    for q in range(Q):
        if np.any(labels == q):
            continue
        counts = np.bincount(labels, minlength=Q)
        movable = counts[labels] > 1
        own_dist = np.sum((X - centroids[labels]) ** 2, axis=1)
        own_dist[~movable] = -np.inf
        donor = int(np.argmax(own_dist))
        labels[donor] = q
        centroids[q] = X[donor]
    return labels


def lloyd(X: np.ndarray, Q: int, rng: np.random.Generator,
          max_iter: int = CLUSTERING_CONFIG["lloyd_max_iter"]) -> Tuple[np.ndarray, float]:
    """One k-means++ seeded Lloyd run; returns labels and their WCSS."""
    centroids = kmeans_plusplus_init(X, Q, rng)
    labels = _repair_empty(X, _assign(X, centroids, None), centroids, Q)
    wcss = _wcss(X, labels, Q)
    for _ in range(max_iter):
        centroids = np.array([X[labels == q].mean(axis=0) for q in range(Q)])
        new_labels = _repair_empty(X, _assign(X, centroids, labels), centroids, Q)
        new_wcss = _wcss(X, new_labels, Q)
        if np.array_equal(new_labels, labels) or new_wcss > wcss:
            break
        labels, wcss = new_labels, new_wcss
    return labels, wcss


def multistart_kmeans(omegas: PrecisionLike, Q: int, n_starts: int, rng_seed: SeedLike) -> KmeansResult:
    """Best of ``n_starts`` Lloyd runs; restart i draws from stream (rng_seed, i)."""
    X = vectorize(omegas)
    C = X.shape[0]
    _check_q(C, Q)
    if n_starts < 1:
        raise ParameterError(f"n_starts must be >= 1, got {n_starts}")
    best: Optional[KmeansResult] = None
    for index, rng in enumerate(spawn_rngs(rng_seed, n_starts)):
        labels, wcss = lloyd(X, Q, rng)
        if best is None or wcss < best.wcss:
            best = KmeansResult(Partition(tuple(labels), Q).canonical(), wcss, index)
    return best


def kmeans_partition(omegas: PrecisionLike, Q: int, n_starts: int = CLUSTERING_CONFIG["n_starts"],
                     rng_seed: SeedLike = 0,
                     exhaustive_limit: int = CLUSTERING_CONFIG["exhaustive_limit"]) -> KmeansResult:
    """Minimize the partition objective over Q-block partitions.

    Trivial for Q = 1 and Q = C. Exact enumeration when the number of
    Q-block partitions is at most ``exhaustive_limit``, multi-start Lloyd
    otherwise.
    """
    stack = as_stack(omegas)
    C = stack.shape[0]
    _check_q(C, Q)
    if Q == 1:
        part = Partition.single(C)
        return KmeansResult(part, partition_objective(stack, part), -1)
    if Q == C:
        return KmeansResult(Partition.singletons(C), 0.0, -1)
    if stirling2(C, Q, exact=True) <= exhaustive_limit:
        return exhaustive_partition(stack, Q)
    result = multistart_kmeans(stack, Q, n_starts, rng_seed)
    logger.debug("Multi-start k-means finished", C=C, Q=Q, wcss=result.wcss,
                 start_index=result.start_index)
    return result


def enumerate_partitions(C: int, Q: int) -> List[Partition]:
    """All Q-block partitions of C classes."""
    _check_q(C, Q)
    return [Partition(labels, Q) for labels in restricted_growth_strings(C, Q)]
