"""
Spectral primitives for the elastic-net precision subproblem.
Soft thresholding, the ridge eigen-map, the ridge precision solve, and the
solution / step-size bounds that govern fixed-step proximal gradient.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy import linalg

from shared.utils.error_handling import DimensionMismatchError, DomainError, NumericError

GAMMA1_FLOOR = 1e-12

ArrayOrFloat = Union[float, np.ndarray]


def symmetrize(A: np.ndarray) -> np.ndarray:
    return (A + A.T) / 2.0


def check_symmetric(A: np.ndarray, name: str = "matrix", rtol: float = 1e-10) -> np.ndarray:
    """Validate a square, numerically symmetric matrix and return its symmetrized copy."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatchError(f"{name} must be square, got shape {A.shape}")
    scale = max(float(np.max(np.abs(A))), 1.0) if A.size else 1.0
    if A.size and float(np.max(np.abs(A - A.T))) > rtol * scale:
        raise DimensionMismatchError(f"{name} is not symmetric")
    return symmetrize(A)


def soft_threshold(A: np.ndarray, tau: float) -> np.ndarray:
    """Elementwise sign(A) * max(|A| - tau, 0)."""
    if tau < 0:
        raise DomainError(f"threshold must be nonnegative, got {tau}")
    A = np.asarray(A, dtype=float)
    return np.sign(A) * np.maximum(np.abs(A) - tau, 0.0)


def ridge_eig(a: ArrayOrFloat, eta: float) -> ArrayOrFloat:
    """Positive minimizer of a*w - log(w) + eta*w^2, i.e. the root of 2*eta*w^2 + a*w - 1 = 0.

    Vectorized over ``a``. The two algebraically equal forms are picked by
    the sign of ``a`` so neither branch cancels.
    """
    if eta <= 0:
        raise DomainError(f"ridge weight must be positive, got {eta}")
    a_arr = np.asarray(a, dtype=float)
    root = np.sqrt(a_arr * a_arr + 8.0 * eta)
    positive = a_arr > 0
    omega = np.where(positive,
                     2.0 / np.where(positive, a_arr + root, 1.0),
                     (root - a_arr) / (4.0 * eta))
    if np.ndim(a) == 0:
        return float(omega)
    return omega


def ridge_precision_solve(A: np.ndarray, eta: float) -> np.ndarray:
    """argmin_Theta tr(A Theta) - logdet Theta + eta ||Theta||_F^2 for symmetric (possibly indefinite) A."""
    if eta <= 0:
        raise DomainError(f"ridge weight must be positive, got {eta}")
    A = check_symmetric(A, "A")
    try:
        d, V = linalg.eigh(A)
    except linalg.LinAlgError as e:
        raise NumericError("symmetric eigendecomposition failed") from e
    w = ridge_eig(d, eta)
    return symmetrize((V * w) @ V.T)


def extreme_eigenvalues(A: np.ndarray) -> Tuple[float, float]:
    """(largest, smallest) eigenvalue of a symmetric matrix."""
    try:
        d = linalg.eigvalsh(symmetrize(np.asarray(A, dtype=float)))
    except linalg.LinAlgError as e:
        raise NumericError("symmetric eigenvalue computation failed") from e
    return float(d[-1]), float(d[0])


def solution_bounds(S_tilde: np.ndarray, gamma1: float, gamma2: float,
                    p: Optional[int] = None) -> Tuple[float, float]:
    """Eigenvalue bounds alpha <= rho(Omega*) <= beta of the elastic-net solution.

    gamma1 = 0 is evaluated at a tiny positive floor.
    """
    if gamma2 <= 0:
        raise DomainError(f"gamma2 must be positive for the solution bounds, got {gamma2}")
    if gamma1 < 0:
        raise DomainError(f"gamma1 must be nonnegative, got {gamma1}")
    S_tilde = check_symmetric(S_tilde, "S_tilde")
    p = S_tilde.shape[0] if p is None else p
    g1 = max(gamma1, GAMMA1_FLOOR)
    rho_max, rho_min = extreme_eigenvalues(S_tilde)
    alpha = ridge_eig(rho_max + g1 * p, gamma2)
    beta = ridge_eig(rho_min - g1 * p, gamma2)
    return alpha, beta


def lipschitz_constant(alpha: float, gamma2: float, p: int) -> float:
    """sqrt(p) * (alpha^-2 + 2*gamma2)."""
    return float(np.sqrt(p) * (alpha ** -2 + 2.0 * gamma2))


class StepBounds(NamedTuple):
    t_max: float
    t_w: float
    b_prime: float
    delta: float


def step_bounds(alpha: float, beta: float, gamma2: float, p: int) -> StepBounds:
    """Admissible fixed step, worst-case optimal step, iterate bound and contraction rate."""
    t_max = alpha ** 2 / (2.0 * alpha ** 2 * gamma2 + 1.0)
    b_prime = beta + np.sqrt(p) * (beta - alpha)
    upper = 2.0 * gamma2 + alpha ** -2
    lower = 2.0 * gamma2 + b_prime ** -2
    t_w = 2.0 / (upper + lower)
    delta = (upper - lower) / (upper + lower)
    return StepBounds(float(t_max), float(t_w), float(b_prime), float(delta))


def contraction_factor(t: float, a: float, b: float, gamma2: float) -> float:
    """Worst-case distance ratio of one fixed step t for Hessian spectra in [a, b]."""
    return float(max(abs(1.0 - 2.0 * t * gamma2 - t / a ** 2),
                     abs(1.0 - 2.0 * t * gamma2 - t / b ** 2)))


@dataclass(frozen=True)
class SpectralBounds:
    """Solution and iterate bounds with the step sizes they certify."""
    alpha: float
    beta: float
    b_prime: float
    t_max: float
    t_w: float
    delta: float
    lipschitz: float

    def __post_init__(self):
        if not (0.0 < self.alpha <= self.beta <= self.b_prime):
            raise DomainError(
                f"inconsistent bounds alpha={self.alpha}, beta={self.beta}, b'={self.b_prime}")
        if not (0.0 <= self.delta < 1.0) or self.t_max <= 0.0:
            raise DomainError(f"inconsistent rate delta={self.delta} or step t_max={self.t_max}")


def spectral_bounds(S_tilde: np.ndarray, gamma1: float, gamma2: float) -> SpectralBounds:
    S_tilde = check_symmetric(S_tilde, "S_tilde")
    p = S_tilde.shape[0]
    alpha, beta = solution_bounds(S_tilde, gamma1, gamma2, p)
    steps = step_bounds(alpha, beta, gamma2, p)
    return SpectralBounds(
        alpha=alpha,
        beta=beta,
        b_prime=steps.b_prime,
        t_max=steps.t_max,
        t_w=steps.t_w,
        delta=steps.delta,
        lipschitz=lipschitz_constant(alpha, gamma2, p),
    )
