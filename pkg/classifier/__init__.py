"""
QDA classification built on cluster-fusion precision estimates.
"""

from .qda import (
    QdaModel,
    QdaPrediction,
    fit_qda,
    discriminant_scores,
    predict_indices,
    qda_predict,
    classification_error,
)

__all__ = [
    'QdaModel',
    'QdaPrediction',
    'fit_qda',
    'discriminant_scores',
    'predict_indices',
    'qda_predict',
    'classification_error',
]
