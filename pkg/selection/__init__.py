"""
Tuning-parameter selection for the cluster-fusion estimators.
"""

from .tuning import (
    TuningGrid,
    HoldoutStatistics,
    ValidationResult,
    stratified_folds,
    holdout_statistics,
    validation_loglik,
    cv_select,
)

__all__ = [
    'TuningGrid',
    'HoldoutStatistics',
    'ValidationResult',
    'stratified_folds',
    'holdout_statistics',
    'validation_loglik',
    'cv_select',
]
