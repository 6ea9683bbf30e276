"""
Quadratic discriminant analysis on estimated or known precision matrices.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from estimators.alternation import FitResult
from estimators.crf import crf_fit
from estimators.model_core import ClassDataset, PenaltyConfig, PrecisionSet, logdet_pd
from estimators.pcen import pcen_fit
from shared.utils.error_handling import DataFormatError, DimensionMismatchError, ParameterError
from shared.utils.logging import get_logger
from shared.utils.seeding import SeedLike

logger = get_logger("qda")

PRIOR_TOL = 1e-12
QDA_METHODS = ("crf", "pcen", "ridge")


@dataclass(frozen=True, eq=False)
class QdaModel:
    """Class precisions, means and log prior probabilities."""
    omegas: PrecisionSet
    mus: np.ndarray
    log_priors: np.ndarray
    classes: Tuple[str, ...] = ()

    def __post_init__(self):
        mus = np.asarray(self.mus, dtype=float)
        log_priors = np.asarray(self.log_priors, dtype=float)
        C, p = self.omegas.C, self.omegas.p
        if mus.shape != (C, p) or log_priors.shape != (C,):
            raise DimensionMismatchError(
                f"means {mus.shape} and priors {log_priors.shape} do not match {C} classes of dimension {p}")
        if abs(float(logsumexp(log_priors))) > PRIOR_TOL:
            raise ParameterError("prior probabilities must sum to one")
        classes = tuple(str(label) for label in self.classes) or tuple(str(c) for c in range(C))
        if len(classes) != C:
            raise DimensionMismatchError(f"{len(classes)} class labels for {C} classes")
        object.__setattr__(self, "mus", mus)
        object.__setattr__(self, "log_priors", log_priors)
        object.__setattr__(self, "classes", classes)

    @property
    def C(self) -> int:
        return self.omegas.C

    @property
    def p(self) -> int:
        return self.omegas.p


class QdaPrediction(NamedTuple):
    label: str
    index: int
    scores: np.ndarray


def log_priors_from_counts(n: Sequence[int], uniform: bool = False) -> np.ndarray:
    """log(n_c / n), or log(1/C) when ``uniform``."""
    n = np.asarray(n, dtype=float)
    if uniform:
        return np.full(n.shape[0], -np.log(n.shape[0]))
    return np.log(n) - np.log(n.sum())


def fit_qda(X: np.ndarray, y: Sequence, method: str, cfg: PenaltyConfig,
            rng_seed: SeedLike = 0, uniform_priors: bool = False) -> Tuple[QdaModel, FitResult]:
    """Fit the precisions with CRF, PCEN or the fusion-free ridge baseline and wrap them in a QDA rule.

    Means are the training class means; priors are empirical unless ``uniform_priors``.
    """
    if method not in QDA_METHODS:
        raise ParameterError(f"unknown method {method!r}; expected one of {QDA_METHODS}")
    data = ClassDataset.from_rows(X, y)
    if method == "pcen":
        fit = pcen_fit(data, cfg, rng_seed)
    elif method == "ridge":
        fit = crf_fit(data, cfg.model_copy(update={"lambda2": 0.0, "Q": 1}), rng_seed)
    else:
        fit = crf_fit(data, cfg, rng_seed)
    model = QdaModel(fit.precisions, data.means, log_priors_from_counts(data.n, uniform_priors), data.classes)
    logger.info("QDA model fitted", method=method, classes=data.C, p=data.p,
                converged=fit.report.converged)
    return model, fit


def discriminant_scores(model: QdaModel, X: np.ndarray) -> np.ndarray:
    """log pi_c + 1/2 logdet Omega_c - 1/2 (x - mu_c)^T Omega_c (x - mu_c), one row per observation."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.p:
        raise DimensionMismatchError(f"observations have {X.shape[1]} features, model expects {model.p}")
    logdets = np.array([logdet_pd(omega) for omega in model.omegas.omegas])
    centred = X[:, None, :] - model.mus[None, :, :]
    quad = np.einsum("ncj,cjk,nck->nc", centred, model.omegas.omegas, centred)
    return model.log_priors[None, :] + 0.5 * logdets[None, :] - 0.5 * quad


def predict_indices(model: QdaModel, X: np.ndarray) -> np.ndarray:
    """Index of the highest score per row; the lowest index wins ties."""
    return np.argmax(discriminant_scores(model, X), axis=1)


def qda_predict(model: QdaModel, x: np.ndarray) -> QdaPrediction:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatchError(f"expected a single observation, got shape {x.shape}")
    scores = discriminant_scores(model, x)[0]
    index = int(np.argmax(scores))
    return QdaPrediction(model.classes[index], index, scores)


def label_indices(model: QdaModel, y: Sequence) -> np.ndarray:
    lookup = {label: c for c, label in enumerate(model.classes)}
    try:
        return np.array([lookup[str(label)] for label in y], dtype=np.int64)
    except KeyError as e:
        raise DataFormatError(f"label {e.args[0]!r} is not one of the model classes {model.classes}") from None


def classification_error(model: QdaModel, X: np.ndarray, y: Sequence, *,
                         predicted: Optional[np.ndarray] = None) -> float:
    """Fraction of rows whose predicted class differs from ``y``."""
    truth = label_indices(model, y)
    if predicted is None:
        predicted = predict_indices(model, X)
    if truth.shape[0] == 0:
        return 0.0
    return float(np.mean(predicted != truth))
