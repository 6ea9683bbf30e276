"""
Data-generating mechanisms for the simulation studies.

Erdos-Renyi based sparse precision matrices, the three clustered GGM
scenarios, the dense QDA scenario, and Gaussian sampling from a precision
matrix.
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import linalg

from config import SIMULATION_CONFIG, RUNTIME_CONFIG
from estimators.model_core import Partition, PrecisionSet
from shared.utils.error_handling import DimensionMismatchError, DomainError, ParameterError
from shared.utils.logging import get_logger
from shared.utils.seeding import derive_seed, make_rng

logger = get_logger("simgen")

Interval = Tuple[float, float]


class ScenarioName(str, Enum):
    BLOCK_ER = "block_er"
    BLOCKDIAG_ER = "blockdiag_er"
    BLOCKDIAG_IDENTITY = "blockdiag_identity"
    QDA_DENSE = "qda_dense"


BLOCK_SCENARIOS = (ScenarioName.BLOCK_ER, ScenarioName.BLOCKDIAG_ER, ScenarioName.BLOCKDIAG_IDENTITY)


class Scenario(BaseModel):
    """One data-generating setting, with four classes in two true clusters."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: ScenarioName
    p: int = Field(ge=2)
    n_per_class: int = Field(ge=0)
    rho: Optional[float] = Field(default=None, gt=-1.0, lt=1.0)
    rng_seed: int = 0

    @model_validator(mode="after")
    def _rho_only_for_qda(self):
        if self.name == ScenarioName.QDA_DENSE and self.rho is None:
            raise ValueError("qda_dense needs rho")
        return self


@dataclass(frozen=True, eq=False)
class GroundTruth:
    omegas_true: PrecisionSet
    mus_true: np.ndarray
    partition_true: Partition

    @property
    def C(self) -> int:
        return self.omegas_true.C


def _check_adjacency(A: np.ndarray, p: Optional[int] = None) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or (p is not None and A.shape[0] != p):
        raise DimensionMismatchError(f"adjacency has shape {A.shape}, expected ({p}, {p})")
    if not np.array_equal(A, A.T) or np.any(np.diag(A) != 0) or not np.all(np.isin(A, (0.0, 1.0))):
        raise ParameterError("adjacency must be symmetric 0/1 with an empty diagonal")
    return A


def _upper_edges(A: np.ndarray) -> np.ndarray:
    return np.argwhere(np.triu(A, k=1) != 0)


def erdos_renyi_adjacency(p: int, n_edges: int, rng: np.random.Generator) -> np.ndarray:
    """Adjacency matrix of a uniformly drawn graph with exactly ``n_edges`` edges."""
    max_edges = p * (p - 1) // 2
    if p < 1 or not 0 <= n_edges <= max_edges:
        raise ParameterError(f"n_edges={n_edges} outside [0, {max_edges}] for p={p}")
    graph = nx.gnm_random_graph(p, n_edges, seed=derive_seed(rng))
    return nx.to_numpy_array(graph, nodelist=range(p), dtype=float)


def remove_edges(A: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Copy of ``A`` with ``k`` uniformly chosen edges deleted."""
    A = _check_adjacency(A)
    edges = _upper_edges(A)
    if not 0 <= k <= len(edges):
        raise ParameterError(f"cannot remove {k} edges from a graph with {len(edges)}")
    out = A.copy()
    for j, l in edges[rng.choice(len(edges), size=k, replace=False)]:
        out[j, l] = out[l, j] = 0.0
    return out


def support_difference(first: np.ndarray, second: np.ndarray,
                       zero_tol: float = RUNTIME_CONFIG["zero_tol"]) -> int:
    """Number of off-diagonal pairs j < k that are nonzero in exactly one of the two matrices."""
    if first.shape != second.shape:
        raise DimensionMismatchError(f"{first.shape} vs {second.shape}")
    upper = np.triu(np.ones(first.shape, dtype=bool), k=1)
    differs = (np.abs(first) > zero_tol) != (np.abs(second) > zero_tol)
    return int(np.sum(differs & upper))


def _normalize_to_precision(weights: np.ndarray) -> np.ndarray:
    """Off-diagonal normalization, unit diagonal, then rescaling to unit variances.

    Entry (j, k) is divided by ``row_sum_scale * max(r_j, r_k)`` with r the
    off-diagonal absolute row sums, instead of dividing each row by its own
    sum; the result stays symmetric and strictly diagonally dominant.
    """
    off = weights - np.diag(np.diag(weights))
    row_sums = np.abs(off).sum(axis=1)
    denom = SIMULATION_CONFIG["row_sum_scale"] * np.maximum.outer(row_sums, row_sums)
    omega = np.divide(off, denom, out=np.zeros_like(off), where=denom > 0)
    np.fill_diagonal(omega, 1.0)

    try:
        factor = linalg.cho_factor(omega, lower=True)
    except linalg.LinAlgError as e:
        raise DomainError("normalized matrix is not positive definite") from e
    sigma = linalg.cho_solve(factor, np.eye(omega.shape[0]))
    scale = np.sqrt(np.diag(sigma))
    omega = scale[:, None] * omega * scale[None, :]
    return (omega + omega.T) / 2.0


def _fill_upper(A: np.ndarray, values: np.ndarray) -> np.ndarray:
    W = np.zeros_like(A)
    edges = _upper_edges(A)
    W[edges[:, 0], edges[:, 1]] = values
    return W + W.T


def build_E(A: np.ndarray, p: int, rng: np.random.Generator) -> np.ndarray:
    """Sparse precision matrix on the support of ``A``.

    Edge weights are uniform on (-0.7, -0.5) U (0.5, 0.7), off-diagonals are
    divided by 1.5 times the larger absolute row sum of their row and column,
    the diagonal is set to one and the result is rescaled to unit variances.
    """
    A = _check_adjacency(A, p)
    n_edges = len(_upper_edges(A))
    low, high = SIMULATION_CONFIG["edge_weight_range"]
    magnitudes = rng.uniform(low, high, size=n_edges)
    signs = rng.choice([-1.0, 1.0], size=n_edges)
    return _normalize_to_precision(_fill_upper(A, magnitudes * signs))


def build_R(A: np.ndarray, base: np.ndarray, V: Interval, rng: np.random.Generator) -> np.ndarray:
    """Perturbation of ``base`` on the support of ``A``: base entry plus a uniform draw from ``V``.

    Normalized like :func:`build_E`.
    """
    base = np.asarray(base, dtype=float)
    A = _check_adjacency(A, base.shape[0])
    edges = _upper_edges(A)
    low, high = V
    values = base[edges[:, 0], edges[:, 1]] + rng.uniform(low, high, size=len(edges))
    return _normalize_to_precision(_fill_upper(A, values))


def mvn_sample(mu: np.ndarray, omega: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """n rows from N(mu, omega^-1), using the Cholesky factor of omega.

    With omega = L L^T, x = mu + L^-T z has covariance omega^-1.
    """
    mu = np.asarray(mu, dtype=float)
    p = mu.shape[0]
    if omega.shape != (p, p):
        raise DimensionMismatchError(f"omega {omega.shape} does not match mean of length {p}")
    if n < 0:
        raise ParameterError(f"sample size must be >= 0, got {n}")
    try:
        L = linalg.cholesky(omega, lower=True)
    except linalg.LinAlgError as e:
        raise DomainError("sampling precision must be positive definite") from e
    Z = rng.standard_normal((n, p))
    if n == 0:
        return Z
    return mu + linalg.solve_triangular(L.T, Z.T, lower=False).T


def sample_classes(truth: GroundTruth, n_per_class: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Per-class data matrices drawn from the true model, in class order."""
    return [mvn_sample(truth.mus_true[c], truth.omegas_true[c], n_per_class, rng) for c in range(truth.C)]


def as_labeled_rows(matrices: Sequence[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """Stack per-class matrices into (X, y) with labels 0..C-1."""
    X = np.vstack(matrices)
    y = np.concatenate([np.full(m.shape[0], c) for c, m in enumerate(matrices)])
    return X, y


def _perturbation() -> Interval:
    return tuple(SIMULATION_CONFIG["perturbation"])


def _er_block(half: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    A = erdos_renyi_adjacency(half, half, rng)
    return A, build_E(A, half, rng)


def _block_er_truth(p: int, rng: np.random.Generator) -> List[np.ndarray]:
    half = p // 2
    removed = SIMULATION_CONFIG["edges_removed"]
    V = _perturbation()

    A1, U = _er_block(half, rng)
    A2, L = _er_block(half, rng)
    omega1 = linalg.block_diag(U, L)
    A3, A4 = remove_edges(A1, removed, rng), remove_edges(A2, removed, rng)
    omega2 = linalg.block_diag(build_R(A3, L, V, rng), build_R(A4, U, V, rng))

    s1 = np.sort(rng.choice(p, size=half, replace=False))
    s2 = np.setdiff1d(np.arange(p), s1)
    A5, G = _er_block(half, rng)
    A6, H = _er_block(half, rng)
    A7, A8 = remove_edges(A5, removed, rng), remove_edges(A6, removed, rng)
    omega3, omega4 = np.zeros((p, p)), np.zeros((p, p))
    omega3[np.ix_(s1, s1)], omega3[np.ix_(s2, s2)] = G, H
    omega4[np.ix_(s1, s1)], omega4[np.ix_(s2, s2)] = build_R(A7, G, V, rng), build_R(A8, H, V, rng)
    return [omega1, omega2, omega3, omega4]


def _blockdiag_er_pair(p: int, rng: np.random.Generator) -> List[np.ndarray]:
    half = p // 2
    V = _perturbation()
    A1, U = _er_block(half, rng)
    A2, L = _er_block(half, rng)
    A3 = remove_edges(A1, SIMULATION_CONFIG["edges_removed"], rng)
    A4 = remove_edges(A2, int(round(SIMULATION_CONFIG["blockdiag_removed_fraction"] * half)), rng)
    first = linalg.block_diag(U, L)
    second = linalg.block_diag(build_R(A3, L, V, rng), build_R(A4, U, V, rng))
    return [first, second]


def _blockdiag_identity_pair(p: int, rng: np.random.Generator) -> List[np.ndarray]:
    half = p // 2
    A1, U = _er_block(half, rng)
    A3 = remove_edges(A1, SIMULATION_CONFIG["edges_removed"], rng)
    identity = np.eye(p - half)
    first = linalg.block_diag(U, identity)
    second = linalg.block_diag(build_R(A3, U, _perturbation(), rng), identity)
    return [first, second]


def linear_spectrum(a: float, b: float, p: int) -> np.ndarray:
    """D(a, b, j) for j = 1..p: linearly spaced from a down to b."""
    if p == 1:
        return np.array([a])
    j = np.arange(1, p + 1)
    return a - (j - 1) * (a - b) / (p - 1)


def tridiagonal_covariance(p: int, rho: float) -> np.ndarray:
    return np.eye(p) + rho * (np.eye(p, k=1) + np.eye(p, k=-1))


def _qda_dense_truth(p: int, rho: float, rng: np.random.Generator) -> Tuple[List[np.ndarray], np.ndarray]:
    rows = SIMULATION_CONFIG["qda_svd_rows"]
    if p > rows:
        raise ParameterError(f"qda_dense needs p <= {rows}, got {p}")
    Z = rng.standard_normal((rows, p))
    _, _, vt = linalg.svd(Z, full_matrices=False)
    omegas = []
    for a, b in (SIMULATION_CONFIG["qda_eigen_first"], SIMULATION_CONFIG["qda_eigen_second"]):
        omegas.append(vt.T @ np.diag(1.0 / linear_spectrum(a, b, p)) @ vt)
    for value in (SIMULATION_CONFIG["qda_rho_fixed"], rho):
        sigma = tridiagonal_covariance(p, value)
        try:
            factor = linalg.cho_factor(sigma, lower=True)
        except linalg.LinAlgError as e:
            raise ParameterError(f"rho={value} gives a covariance that is not positive definite") from e
        omegas.append(linalg.cho_solve(factor, np.eye(p)))
    level = np.log(p) / p
    mus = np.array([scale * level * np.ones(p) for scale in SIMULATION_CONFIG["qda_mean_scales"]])
    return [(omega + omega.T) / 2.0 for omega in omegas], mus


def make_truth(s: Scenario, replication: int = 0) -> GroundTruth:
    """True precision matrices, means and partition for one replication of a scenario."""
    if s.name in BLOCK_SCENARIOS:
        if s.p % 2:
            raise ParameterError(f"{s.name.value} needs an even p, got {s.p}")
        if s.p // 2 < SIMULATION_CONFIG["edges_removed"]:
            raise ParameterError(f"{s.name.value} needs p >= {2 * SIMULATION_CONFIG['edges_removed']}")

    rng = make_rng(s.rng_seed, replication, 0)
    mus = np.zeros((4, s.p))
    if s.name == ScenarioName.BLOCK_ER:
        omegas = _block_er_truth(s.p, rng)
    elif s.name == ScenarioName.BLOCKDIAG_ER:
        omegas = _blockdiag_er_pair(s.p, rng) + _blockdiag_er_pair(s.p, rng)
    elif s.name == ScenarioName.BLOCKDIAG_IDENTITY:
        omegas = _blockdiag_identity_pair(s.p, rng) + _blockdiag_identity_pair(s.p, rng)
    else:
        omegas, mus = _qda_dense_truth(s.p, s.rho, rng)

    logger.debug("Generated ground truth", scenario=s.name.value, p=s.p, replication=replication)
    return GroundTruth(PrecisionSet(np.array(omegas)), mus, Partition((0, 0, 1, 1), 2))


def make_scenario(s: Scenario, replication: int = 0) -> Tuple[GroundTruth, List[np.ndarray]]:
    """Ground truth and ``s.n_per_class`` training rows per class.

    Truth and data come from separate streams keyed by (rng_seed, replication),
    so identical arguments give bitwise-identical output.
    """
    truth = make_truth(s, replication)
    data = sample_classes(truth, s.n_per_class, make_rng(s.rng_seed, replication, 1))
    return truth, data
