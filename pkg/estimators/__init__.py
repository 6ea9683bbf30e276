"""
Cluster-fusion precision matrix estimators.

Jointly estimates C Gaussian precision matrices and the partition of the
classes into Q clusters, with ridge (CRF) or elastic-net (PCEN) penalties.
"""

from .model_core import (
    ClassDataset,
    PrecisionSet,
    Partition,
    PenaltyConfig,
    SolverReport,
    neg2_loglik,
    fusion_penalty,
    crf_objective,
    pcen_objective,
    metric_stp,
    metric_tpr,
    metric_frob_error,
    metric_nonzero_count,
)
from .gen_ista import GenIstaConfig, GenIstaResult, StepMode, gen_ista_solve
from .clusterer import KmeansResult, kmeans_partition, partition_objective
from .alternation import FitResult, InnerSolveResult
from .crf import crf_fit, crf_inner_solve
from .pcen import pcen_fit, pcen_inner_solve

__all__ = [
    'ClassDataset',
    'PrecisionSet',
    'Partition',
    'PenaltyConfig',
    'SolverReport',
    'neg2_loglik',
    'fusion_penalty',
    'crf_objective',
    'pcen_objective',
    'metric_stp',
    'metric_tpr',
    'metric_frob_error',
    'metric_nonzero_count',
    'GenIstaConfig',
    'GenIstaResult',
    'StepMode',
    'gen_ista_solve',
    'KmeansResult',
    'kmeans_partition',
    'partition_objective',
    'FitResult',
    'InnerSolveResult',
    'crf_fit',
    'crf_inner_solve',
    'pcen_fit',
    'pcen_inner_solve',
]
