"""
GEN-ISTA: proximal gradient for the elastic-net penalized precision subproblem

    minimize  tr(S Omega) - logdet Omega + gamma1 ||Omega||_1 + gamma2 ||Omega||_F^2

over positive-definite Omega, where S may be indefinite.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import linalg

from config import GEN_ISTA_CONFIG
from shared.utils.error_handling import DomainError, NumericError
from shared.utils.logging import get_logger
from .operators import check_symmetric, soft_threshold, spectral_bounds, symmetrize

logger = get_logger("gen_ista")

# Round-off allowance on the majorization test, relative to |f|
MAJORIZER_SLACK = 1e-13
FIXED_STEP_FALLBACK = 0.5


class StepMode(str, Enum):
    """Step-size policy."""
    BACKTRACKING = "backtracking"
    FIXED_THEORY = "fixed_theory"
    FIXED_OPTIMAL = "fixed_optimal"


class GenIstaConfig(BaseModel):
    """Penalty weights and stopping rules for one elastic-net solve."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    gamma1: float = Field(ge=0.0)
    gamma2: float = Field(ge=0.0)
    eps: float = Field(default=GEN_ISTA_CONFIG["eps"], gt=0.0)
    grad_tol: float = Field(default=GEN_ISTA_CONFIG["grad_tol"], gt=0.0)
    eta_backtrack: float = Field(default=GEN_ISTA_CONFIG["eta_backtrack"], gt=0.0, lt=1.0)
    t0: float = Field(default=GEN_ISTA_CONFIG["t0"], gt=0.0)
    max_iter: int = Field(default=GEN_ISTA_CONFIG["max_iter"], ge=1)
    max_backtracks: int = Field(default=GEN_ISTA_CONFIG["max_backtracks"], ge=1)
    step_mode: StepMode = StepMode.BACKTRACKING

    @model_validator(mode="after")
    def _fixed_steps_need_ridge(self):
        if self.step_mode != StepMode.BACKTRACKING and self.gamma2 <= 0.0:
            raise ValueError("fixed step modes need gamma2 > 0; use backtracking for gamma2 = 0")
        return self


@dataclass
class GenIstaResult:
    omega: np.ndarray
    objective_trace: List[float] = field(default_factory=list)
    steps_used: List[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    backtracks: int = 0


def _cholesky(omega: np.ndarray) -> Optional[np.ndarray]:
    """Lower Cholesky factor, or None if omega is not positive definite."""
    try:
        return linalg.cholesky(omega, lower=True, check_finite=False)
    except linalg.LinAlgError:
        return None


def _smooth_from_factor(omega: np.ndarray, factor: np.ndarray, S: np.ndarray, gamma2: float) -> float:
    logdet = 2.0 * float(np.sum(np.log(np.diag(factor))))
    return float(np.sum(S * omega)) - logdet + gamma2 * float(np.sum(omega * omega))


def _inverse_from_factor(factor: np.ndarray) -> np.ndarray:
    p = factor.shape[0]
    return symmetrize(linalg.cho_solve((factor, True), np.eye(p), check_finite=False))


def smooth_objective(omega: np.ndarray, S_tilde: np.ndarray, gamma2: float) -> float:
    """f(Omega) = tr(S Omega) - logdet Omega + gamma2 ||Omega||_F^2."""
    factor = _cholesky(omega)
    if factor is None:
        raise DomainError("smooth objective needs a positive-definite argument")
    return _smooth_from_factor(omega, factor, S_tilde, gamma2)


def smooth_gradient(omega: np.ndarray, S_tilde: np.ndarray, gamma2: float) -> np.ndarray:
    """S - Omega^-1 + 2 gamma2 Omega."""
    factor = _cholesky(omega)
    if factor is None:
        raise DomainError("gradient needs a positive-definite argument")
    return S_tilde - _inverse_from_factor(factor) + 2.0 * gamma2 * omega


def elastic_net_objective(omega: np.ndarray, S_tilde: np.ndarray, gamma1: float, gamma2: float) -> float:
    return smooth_objective(omega, S_tilde, gamma2) + gamma1 * float(np.sum(np.abs(omega)))


def majorizer_gap(omega_new: np.ndarray, omega_old: np.ndarray, S_tilde: np.ndarray,
                  gamma2: float, t: float) -> float:
    """Quadratic upper model at omega_old evaluated at omega_new, minus f(omega_new).

    Nonnegative exactly when the step t passes the sufficient-decrease test.
    """
    diff = omega_new - omega_old
    model = (smooth_objective(omega_old, S_tilde, gamma2)
             + float(np.sum(smooth_gradient(omega_old, S_tilde, gamma2) * diff))
             + float(np.sum(diff * diff)) / (2.0 * t))
    return model - smooth_objective(omega_new, S_tilde, gamma2)


def kkt_residual(omega: np.ndarray, S_tilde: np.ndarray, gamma1: float, gamma2: float) -> float:
    """Largest violation of the subgradient optimality conditions."""
    grad = smooth_gradient(omega, S_tilde, gamma2)
    on_support = omega != 0.0
    violation = np.where(on_support,
                         np.abs(grad + gamma1 * np.sign(omega)),
                         np.maximum(np.abs(grad) - gamma1, 0.0))
    return float(np.max(violation))


def _default_start(S: np.ndarray, cfg: GenIstaConfig) -> np.ndarray:
    p = S.shape[0]
    if cfg.step_mode != StepMode.BACKTRACKING:
        return spectral_bounds(S, cfg.gamma1, cfg.gamma2).alpha * np.eye(p)
    diag = np.diag(S)
    if np.all(diag > 0.0):
        return np.diag(1.0 / diag)
    if cfg.gamma2 > 0.0:
        return spectral_bounds(S, cfg.gamma1, cfg.gamma2).alpha * np.eye(p)
    return np.eye(p)


def gen_ista_solve(S_tilde: np.ndarray, cfg: GenIstaConfig,
                   omega0: Optional[np.ndarray] = None,
                   callback: Optional[Callable[[int, np.ndarray], None]] = None) -> GenIstaResult:
    """Minimize the elastic-net penalized Gaussian objective by proximal gradient.

    Backtracking restarts every iteration at ``cfg.t0 * max_j(Omega_jj)^2``
    and shrinks by ``cfg.eta_backtrack`` until the candidate is positive definite and the
    quadratic majorizer bounds the smooth part. Fixed modes use t_max or t_w
    from the spectral bounds. Stops once the relative objective change is at
    most ``eps`` and the gradient-mapping norm times ``max_j(Omega_jj)`` is at most
    ``grad_tol``; at least one iteration always runs. Both the starting step
    and the stopping test follow a rescaling of S, so solving for c*S with
    weights c*gamma1, c**2*gamma2 takes the same path to Omega/c.
    ``callback(k, omega)`` sees every accepted iterate, k = 1, 2, ...

    Raises:
        DimensionMismatchError: ``S_tilde`` is not square and symmetric.
        DomainError: ``omega0`` is not positive definite.
        NumericError: no acceptable step within ``cfg.max_backtracks`` halvings.
    """
    S = check_symmetric(S_tilde, "S_tilde")
    p = S.shape[0]
    gamma1, gamma2 = cfg.gamma1, cfg.gamma2

    fixed_step = None
    if cfg.step_mode == StepMode.FIXED_THEORY:
        fixed_step = spectral_bounds(S, gamma1, gamma2).t_max
    elif cfg.step_mode == StepMode.FIXED_OPTIMAL:
        fixed_step = spectral_bounds(S, gamma1, gamma2).t_w

    omega = _default_start(S, cfg) if omega0 is None else check_symmetric(omega0, "omega0")
    if omega.shape != (p, p):
        raise DomainError(f"omega0 has shape {omega.shape}, expected {(p, p)}")
    factor = _cholesky(omega)
    if factor is None:
        raise DomainError("omega0 must be positive definite")

    f_val = _smooth_from_factor(omega, factor, S, gamma2)
    F_val = f_val + gamma1 * float(np.sum(np.abs(omega)))
    result = GenIstaResult(omega=omega, objective_trace=[F_val])
    warned_fallback = False

    for k in range(cfg.max_iter):
        grad = S - _inverse_from_factor(factor) + 2.0 * gamma2 * omega
        t = cfg.t0 * float(np.max(np.diag(omega))) ** 2 if fixed_step is None else fixed_step

        for _ in range(cfg.max_backtracks):
            candidate = symmetrize(soft_threshold(omega - t * grad, t * gamma1))
            cand_factor = _cholesky(candidate)
            if cand_factor is None:
                if fixed_step is not None and not warned_fallback:
                    logger.warning("Fixed step left the positive-definite cone; halving",
                                   step=t, iteration=k)
                    warned_fallback = True
                t *= cfg.eta_backtrack if fixed_step is None else FIXED_STEP_FALLBACK
                result.backtracks += 1
                continue
            f_new = _smooth_from_factor(candidate, cand_factor, S, gamma2)
            if fixed_step is not None:
                break
            diff = candidate - omega
            model = f_val + float(np.sum(grad * diff)) + float(np.sum(diff * diff)) / (2.0 * t)
            if f_new <= model + MAJORIZER_SLACK * max(1.0, abs(f_val)):
                break
            t *= cfg.eta_backtrack
            result.backtracks += 1
        else:
            raise NumericError(
                f"line search exhausted after {cfg.max_backtracks} reductions at iteration {k}")

        step_norm = float(np.linalg.norm(candidate - omega)) / t
        # gradient mapping in units of the largest diagonal entry; unchanged by rescaling S
        scaled_step = step_norm * float(np.max(np.diag(candidate)))
        F_new = f_new + gamma1 * float(np.sum(np.abs(candidate)))
        change = abs(F_new - F_val)

        omega, factor, f_val, F_val = candidate, cand_factor, f_new, F_new
        result.objective_trace.append(F_val)
        result.steps_used.append(t)
        result.iterations = k + 1
        if callback is not None:
            callback(k + 1, omega)

        if change <= cfg.eps * (1.0 + abs(F_val)) and scaled_step <= cfg.grad_tol:
            result.converged = True
            break

    result.omega = omega
    logger.solver_log("gen_ista", iterations=result.iterations, converged=result.converged,
                      objective=F_val, backtracks=result.backtracks, mode=cfg.step_mode.value)
    return result
