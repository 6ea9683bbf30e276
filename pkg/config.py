"""
Configuration settings for the clusterfuse estimators.
"""

import os
from typing import Dict, Any

# Outer alternation and fixed-partition solvers
SOLVER_CONFIG = {
    "tol": float(os.getenv("CLUSTERFUSE_TOL", "1e-7")),
    "max_iter": int(os.getenv("CLUSTERFUSE_MAX_ITER", "50")),
    "inner_max_iter": int(os.getenv("CLUSTERFUSE_INNER_MAX_ITER", "1000")),
}

# GEN-ISTA proximal solver
GEN_ISTA_CONFIG = {
    "eps": float(os.getenv("CLUSTERFUSE_ISTA_EPS", "1e-8")),
    "grad_tol": float(os.getenv("CLUSTERFUSE_ISTA_GRAD_TOL", "1e-8")),
    "eta_backtrack": float(os.getenv("CLUSTERFUSE_ISTA_ETA", "0.5")),
    "t0": float(os.getenv("CLUSTERFUSE_ISTA_T0", "1.0")),
    "max_iter": int(os.getenv("CLUSTERFUSE_ISTA_MAX_ITER", "5000")),
    "max_backtracks": int(os.getenv("CLUSTERFUSE_ISTA_MAX_BACKTRACKS", "60")),
}

# Partition subproblem
CLUSTERING_CONFIG = {
    "n_starts": int(os.getenv("CLUSTERFUSE_N_STARTS", "100")),
    "lloyd_max_iter": int(os.getenv("CLUSTERFUSE_LLOYD_MAX_ITER", "300")),
    "exhaustive_limit": int(os.getenv("CLUSTERFUSE_EXHAUSTIVE_LIMIT", "2000")),
}

# Cross-validation
TUNING_CONFIG = {
    "folds": int(os.getenv("CLUSTERFUSE_FOLDS", "5")),
}

# Data-generating mechanisms
SIMULATION_CONFIG = {
    "edge_weight_range": (0.5, 0.7),
    "row_sum_scale": 1.5,
    "perturbation": (-0.01, 0.01),
    "edges_removed": 4,
    "blockdiag_removed_fraction": 0.2,
    "qda_svd_rows": 100,
    "qda_eigen_first": (1000.0, 100.0),
    "qda_eigen_second": (999.0, 99.0),
    "qda_rho_fixed": 0.45,
    "qda_mean_scales": (20.0, -10.0, 10.0, -20.0),
    "qda_test_per_class": int(os.getenv("CLUSTERFUSE_QDA_TEST_PER_CLASS", "500")),
}

# Runtime behaviour shared by the CLI and the metrics
RUNTIME_CONFIG = {
    "workers": int(os.getenv("CLUSTERFUSE_WORKERS", "1")),
    "zero_tol": float(os.getenv("CLUSTERFUSE_ZERO_TOL", "1e-8")),
    "model_schema_version": 1,
}

# Logging configuration
LOG_LEVEL = os.getenv("LOG_LEVEL", "WARNING")
LOG_DIR = os.getenv("LOG_DIR", "")


def get_all_config() -> Dict[str, Any]:
    """Get all configuration settings."""
    return {
        "solver": SOLVER_CONFIG,
        "gen_ista": GEN_ISTA_CONFIG,
        "clustering": CLUSTERING_CONFIG,
        "tuning": TUNING_CONFIG,
        "simulation": SIMULATION_CONFIG,
        "runtime": RUNTIME_CONFIG,
        "logging": {
            "level": LOG_LEVEL,
            "directory": LOG_DIR
        }
    }
