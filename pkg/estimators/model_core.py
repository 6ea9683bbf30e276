"""
Statistical data model for clustered precision estimation.
Per-class sample statistics, precision sets, partitions, penalized objectives and metrics.
"""

from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import linalg

from config import SOLVER_CONFIG, GEN_ISTA_CONFIG, CLUSTERING_CONFIG, RUNTIME_CONFIG
from shared.utils.error_handling import (
    DegenerateClassError,
    DimensionMismatchError,
    DomainError,
    InitializationError,
    ParameterError,
)

SYMMETRY_RTOL = 1e-12
PSD_RTOL = 1e-10


def _symmetry_gap(A: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(A))), 1.0) if A.size else 1.0
    return float(np.max(np.abs(A - A.T))) / scale if A.size else 0.0


def logdet_pd(omega: np.ndarray) -> float:
    """log det of a positive-definite matrix via Cholesky."""
    try:
        factor, _ = linalg.cho_factor(omega, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as e:
        raise DomainError("matrix is not positive definite; logdet undefined") from e
    return 2.0 * float(np.sum(np.log(np.diag(factor))))


@dataclass(frozen=True, eq=False)
class ClassDataset:
    """Per-class sample sizes, means and 1/n sample covariances."""
    n: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    classes: Tuple[str, ...] = ()

    def __post_init__(self):
        n = np.asarray(self.n, dtype=np.int64)
        means = np.asarray(self.means, dtype=float)
        covs = np.asarray(self.covariances, dtype=float)
        if covs.ndim != 3 or covs.shape[1] != covs.shape[2]:
            raise DimensionMismatchError(f"covariances must have shape (C, p, p), got {covs.shape}")
        C, p = covs.shape[0], covs.shape[1]
        if C < 1 or p < 1:
            raise DimensionMismatchError("need at least one class and one variable")
        if n.shape != (C,) or means.shape != (C, p):
            raise DimensionMismatchError(
                f"sizes {n.shape} and means {means.shape} do not match {C} classes of dimension {p}")
        if np.any(n < 1):
            raise DegenerateClassError(f"class sizes must be >= 1, got {n.tolist()}")
        for c in range(C):
            if _symmetry_gap(covs[c]) > SYMMETRY_RTOL:
                raise DimensionMismatchError(f"covariance of class {c} is not symmetric")
            eig = linalg.eigvalsh(covs[c])
            if eig[0] < -PSD_RTOL * max(eig[-1], 1e-300):
                raise DomainError(f"covariance of class {c} is not positive semidefinite")
        classes = tuple(str(label) for label in self.classes) or tuple(str(c) for c in range(C))
        if len(classes) != C:
            raise DimensionMismatchError(f"{len(classes)} class labels for {C} classes")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covariances", covs)
        object.__setattr__(self, "classes", classes)

    @property
    def C(self) -> int:
        return int(self.covariances.shape[0])

    @property
    def p(self) -> int:
        return int(self.covariances.shape[1])

    @classmethod
    def from_rows(cls, X: np.ndarray, y: Sequence, classes: Optional[Sequence] = None) -> "ClassDataset":
        """Build sample statistics from an observation matrix and its labels.

        ``classes`` fixes the class order; by default the sorted distinct labels.
        """
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise DimensionMismatchError(f"{X.shape} observations for {y.shape[0]} labels")
        if classes is None:
            classes = sorted(set(y.tolist()))
        n, means, covs = [], [], []
        for label in classes:
            rows = X[y == label]
            if rows.shape[0] == 0:
                raise DegenerateClassError(f"class {label!r} has no observations")
            xbar = rows.mean(axis=0)
            centered = rows - xbar
            S = centered.T @ centered / rows.shape[0]
            n.append(rows.shape[0])
            means.append(xbar)
            covs.append((S + S.T) / 2.0)
        return cls(np.array(n), np.array(means), np.array(covs), tuple(str(c) for c in classes))


@dataclass(frozen=True, eq=False)
class PrecisionSet:
    """C symmetric positive-definite precision matrices."""
    omegas: np.ndarray

    def __post_init__(self):
        omegas = np.asarray(self.omegas, dtype=float)
        if omegas.ndim != 3 or omegas.shape[1] != omegas.shape[2]:
            raise DimensionMismatchError(f"precisions must have shape (C, p, p), got {omegas.shape}")
        for c, omega in enumerate(omegas):
            if _symmetry_gap(omega) > SYMMETRY_RTOL:
                raise DimensionMismatchError(f"precision {c} is not symmetric")
            try:
                linalg.cholesky(omega, lower=True)
            except linalg.LinAlgError as e:
                raise DomainError(f"precision {c} is not positive definite") from e
        object.__setattr__(self, "omegas", omegas)

    @classmethod
    def from_list(cls, matrices: Iterable[np.ndarray]) -> "PrecisionSet":
        return cls(np.array([np.asarray(m, dtype=float) for m in matrices]))

    @property
    def C(self) -> int:
        return int(self.omegas.shape[0])

    @property
    def p(self) -> int:
        return int(self.omegas.shape[1])

    def __len__(self) -> int:
        return self.C

    def __getitem__(self, c: int) -> np.ndarray:
        return self.omegas[c]


PrecisionLike = Union[PrecisionSet, np.ndarray]


def as_stack(omegas: PrecisionLike) -> np.ndarray:
    """The (C, p, p) array behind a PrecisionSet or a raw stack."""
    if isinstance(omegas, PrecisionSet):
        return omegas.omegas
    stack = np.asarray(omegas, dtype=float)
    if stack.ndim == 2:
        stack = stack[None, :, :]
    return stack


@dataclass(frozen=True, eq=False)
class Partition:
    """Assignment of C classes to Q non-empty clusters labelled 0..Q-1."""
    assignment: Tuple[int, ...]
    Q: int

    def __post_init__(self):
        assignment = tuple(int(label) for label in self.assignment)
        Q = int(self.Q)
        if Q < 1 or not assignment:
            raise ParameterError("a partition needs Q >= 1 and at least one class")
        if any(label < 0 or label >= Q for label in assignment):
            raise ParameterError(f"labels {assignment} out of range for Q={Q}")
        if len(set(assignment)) != Q:
            raise ParameterError(f"partition {assignment} leaves a cluster empty (Q={Q})")
        object.__setattr__(self, "assignment", assignment)
        object.__setattr__(self, "Q", Q)

    @property
    def C(self) -> int:
        return len(self.assignment)

    def blocks(self) -> List[np.ndarray]:
        """Class indices of each cluster, ascending within the block."""
        labels = np.asarray(self.assignment)
        return [np.flatnonzero(labels == q) for q in range(self.Q)]

    def cardinalities(self) -> List[int]:
        return [len(block) for block in self.blocks()]

    def canonical(self) -> "Partition":
        """Relabel clusters in order of first appearance."""
        mapping = {}
        for label in self.assignment:
            mapping.setdefault(label, len(mapping))
        return Partition(tuple(mapping[label] for label in self.assignment), self.Q)

    def same_as(self, other: "Partition") -> bool:
        """Equality up to a permutation of cluster labels."""
        return self.canonical().assignment == other.canonical().assignment

    @classmethod
    def single(cls, C: int) -> "Partition":
        return cls((0,) * C, 1)

    @classmethod
    def singletons(cls, C: int) -> "Partition":
        return cls(tuple(range(C)), C)

    def __eq__(self, other) -> bool:
        return isinstance(other, Partition) and self.same_as(other)

    def __hash__(self) -> int:
        return hash(self.canonical().assignment)


class PenaltyConfig(BaseModel):
    """Tuning parameters and solver tolerances for the cluster-fusion fits."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    lambda1: float = Field(ge=0.0, description="ridge / L1 weight")
    lambda2: float = Field(ge=0.0, description="fusion weight")
    Q: int = Field(ge=1, description="number of clusters")
    tol: float = Field(default=SOLVER_CONFIG["tol"], gt=0.0)
    max_iter: int = Field(default=SOLVER_CONFIG["max_iter"], ge=1)
    inner_max_iter: int = Field(default=SOLVER_CONFIG["inner_max_iter"], ge=1)
    n_starts: int = Field(default=CLUSTERING_CONFIG["n_starts"], ge=1)
    ista_eps: float = Field(default=GEN_ISTA_CONFIG["eps"], gt=0.0)
    ista_grad_tol: float = Field(default=GEN_ISTA_CONFIG["grad_tol"], gt=0.0)
    ista_max_iter: int = Field(default=GEN_ISTA_CONFIG["max_iter"], ge=1)
    n_jobs: int = Field(default=1, ge=1)

    def require_fit_ready(self, C: int):
        """Checks the constraints that depend on the data or apply only to fits."""
        if self.lambda1 <= 0.0:
            raise ParameterError(f"lambda1 must be > 0 for a fit, got {self.lambda1}")
        if self.Q > C:
            raise ParameterError(f"Q={self.Q} exceeds the number of classes C={C}")


@dataclass
class SolverReport:
    """Diagnostics of one outer alternation."""
    objective_trace: List[float] = field(default_factory=list)
    partition_history: List[Partition] = field(default_factory=list)
    inner_sweeps: List[int] = field(default_factory=list)
    step_sizes: List[float] = field(default_factory=list)
    rounds: int = 0
    converged: bool = False
    inner_converged: bool = True
    failed_class: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "objective_trace": [float(v) for v in self.objective_trace],
            "partition_history": [list(part.assignment) for part in self.partition_history],
            "inner_sweeps": list(self.inner_sweeps),
            "step_sizes": [float(v) for v in self.step_sizes],
            "rounds": self.rounds,
            "converged": self.converged,
            "inner_converged": self.inner_converged,
            "failed_class": self.failed_class,
        }


def _check_conformable(data: ClassDataset, stack: np.ndarray):
    if stack.shape != (data.C, data.p, data.p):
        raise DimensionMismatchError(
            f"precision stack {stack.shape} does not match C={data.C}, p={data.p}")


def _neg2_terms(data: ClassDataset, stack: np.ndarray, members: Sequence[int]) -> float:
    total = 0.0
    for c in members:
        total += data.n[c] * (float(np.sum(data.covariances[c] * stack[c])) - logdet_pd(stack[c]))
    return total


def neg2_loglik(data: ClassDataset, omegas: PrecisionLike) -> float:
    """Profiled -2 log-likelihood: sum_c n_c {tr(S_c Omega_c) - logdet Omega_c}."""
    stack = as_stack(omegas)
    _check_conformable(data, stack)
    return _neg2_terms(data, stack, range(data.C))


def within_cluster_spread(stack: np.ndarray, members: Sequence[int]) -> float:
    """sum over members of ||Omega_c - mean||_F^2, equal to the pair sum divided by card."""
    block = stack[np.asarray(members)]
    centred = block - block.mean(axis=0)
    return float(np.sum(centred * centred))


def fusion_penalty(omegas: PrecisionLike, part: Partition, lambda2: float) -> float:
    """(lambda2/2) sum_q card_q^-1 sum_{c<m in D_q} ||Omega_c - Omega_m||_F^2."""
    stack = as_stack(omegas)
    if stack.shape[0] != part.C:
        raise DimensionMismatchError(f"{stack.shape[0]} precisions for a partition of {part.C} classes")
    if lambda2 == 0.0:
        return 0.0
    return 0.5 * lambda2 * sum(within_cluster_spread(stack, block) for block in part.blocks())


def cluster_objective(data: ClassDataset, omegas: PrecisionLike, members: Sequence[int],
                      lambda1: float, lambda2: float, penalty: str) -> float:
    """Fixed-partition objective restricted to one cluster.

    ``penalty`` is ``"ridge"`` (CRF) or ``"l1"`` (PCEN). ``omegas`` may be the
    full stack or just the member block, in member order.
    """
    stack = as_stack(omegas)
    members = list(members)
    if stack.shape[0] == len(members) and stack.shape[0] != data.C:
        local = stack
    else:
        local = stack[np.asarray(members)]
    total = 0.0
    for k, c in enumerate(members):
        omega = local[k]
        total += data.n[c] * (float(np.sum(data.covariances[c] * omega)) - logdet_pd(omega))
        if penalty == "ridge":
            total += 0.5 * lambda1 * float(np.sum(omega * omega))
        elif penalty == "l1":
            total += lambda1 * float(np.sum(np.abs(omega)))
        else:
            raise ParameterError(f"unknown penalty {penalty!r}")
    if lambda2 > 0.0 and len(members) > 1:
        total += 0.5 * lambda2 * within_cluster_spread(local, range(len(members)))
    return total


def crf_objective(data: ClassDataset, omegas: PrecisionLike, part: Partition, cfg: PenaltyConfig) -> float:
    """g(Omega) + (lambda1/2) sum ||Omega_c||_F^2 + fusion penalty."""
    stack = as_stack(omegas)
    _check_conformable(data, stack)
    ridge = 0.5 * cfg.lambda1 * float(np.sum(stack * stack))
    return neg2_loglik(data, stack) + ridge + fusion_penalty(stack, part, cfg.lambda2)


def pcen_objective(data: ClassDataset, omegas: PrecisionLike, part: Partition, cfg: PenaltyConfig) -> float:
    """g(Omega) + lambda1 sum ||Omega_c||_1 + fusion penalty (diagonal included in the L1 norm)."""
    stack = as_stack(omegas)
    _check_conformable(data, stack)
    l1 = cfg.lambda1 * float(np.sum(np.abs(stack)))
    return neg2_loglik(data, stack) + l1 + fusion_penalty(stack, part, cfg.lambda2)


def initial_precisions(data: ClassDataset) -> np.ndarray:
    """Diagonal starting point diag(1 / S_c,jj) for every class."""
    diagonals = np.diagonal(data.covariances, axis1=1, axis2=2)
    if np.any(diagonals <= 0.0):
        c, j = np.argwhere(diagonals <= 0.0)[0]
        raise InitializationError(
            f"class {data.classes[c]!r} has zero sample variance in variable {j}; "
            "diagonal initialization needs every S_c,jj > 0")
    return np.array([np.diag(1.0 / d) for d in diagonals])


def _nonzero(stack: np.ndarray, zero_tol: float) -> np.ndarray:
    return np.abs(stack) > zero_tol


def metric_stp(truth: PrecisionLike, est: PrecisionLike,
               zero_tol: float = RUNTIME_CONFIG["zero_tol"]) -> int:
    """Entries (diagonal included) nonzero in both truth and estimate, summed over classes."""
    true_stack, est_stack = as_stack(truth), as_stack(est)
    if true_stack.shape != est_stack.shape:
        raise DimensionMismatchError(f"truth {true_stack.shape} vs estimate {est_stack.shape}")
    return int(np.sum(_nonzero(true_stack, zero_tol) & _nonzero(est_stack, zero_tol)))


def metric_tpr(truth: PrecisionLike, est: PrecisionLike,
               zero_tol: float = RUNTIME_CONFIG["zero_tol"]) -> float:
    """STP divided by the number of truth nonzeros."""
    positives = int(np.sum(_nonzero(as_stack(truth), zero_tol)))
    return metric_stp(truth, est, zero_tol) / positives if positives else 0.0


def metric_nonzero_count(est: PrecisionLike, zero_tol: float = RUNTIME_CONFIG["zero_tol"]) -> int:
    return int(np.sum(_nonzero(as_stack(est), zero_tol)))


def metric_frob_error(truth: PrecisionLike, est: PrecisionLike) -> float:
    """sum_c ||Omega*_c - Omega_hat_c||_F^2."""
    true_stack, est_stack = as_stack(truth), as_stack(est)
    if true_stack.shape != est_stack.shape:
        raise DimensionMismatchError(f"truth {true_stack.shape} vs estimate {est_stack.shape}")
    diff = true_stack - est_stack
    return float(np.sum(diff * diff))
