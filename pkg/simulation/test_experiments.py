"""
Tests for the replication driver.
"""

import numpy as np
import pytest

from selection.tuning import TuningGrid
from shared.utils.error_handling import ErrorRecoveryManager
from .experiments import (
    GGM_METRICS,
    QDA_METRICS,
    RESULT_COLUMNS,
    ExperimentConfig,
    method_grid,
    method_penalty,
    run_experiment,
    summarize,
)
from .simgen import Scenario


def ggm_config(reps=2, Q_values=(2,), **kwargs):
    return ExperimentConfig(
        scenario=Scenario(name="block_er", p=8, n_per_class=40, rng_seed=3),
        grid=TuningGrid(lambda1_values=[1.0], lambda2_values=[0.0, 5.0], Q_values=list(Q_values)),
        reps=reps,
        **kwargs,
    )


def qda_config(reps=2, **kwargs):
    return ExperimentConfig(
        scenario=Scenario(name="qda_dense", p=6, n_per_class=20, rho=0.4, rng_seed=5),
        grid=TuningGrid(lambda1_values=[1.0], lambda2_values=[10.0], Q_values=[2]),
        reps=reps,
        n_test_per_class=30,
        **kwargs,
    )


class TestMethodReductions:
    """How baselines map onto the grid."""

    def test_penalty_per_method(self):
        """Baselines drop the fusion weight and use a single cluster."""
        assert method_penalty("pcen", 1.0, 5.0, 2) == (1.0, 5.0, 2)
        assert method_penalty("separate", 1.0, 5.0, 2) == (1.0, 0.0, 1)
        assert method_penalty("rf", 1.0, 5.0, 2) == (1.0, 5.0, 1)
        assert method_penalty("ridge", 1.0, 5.0, 2) == (1.0, 0.0, 1)

    def test_grid_per_method(self):
        """Tuning grids shrink to the parameters a method uses."""
        grid = TuningGrid(lambda1_values=[1.0, 2.0], lambda2_values=[0.0, 5.0], Q_values=[1, 2])
        assert len(method_grid(grid, "crf").points()) == 8
        assert method_grid(grid, "rf").Q_values == [1]
        assert method_grid(grid, "separate").points() == [(1.0, 0.0, 1), (2.0, 0.0, 1)]


class TestRunExperiment:
    """End-to-end replication runs at toy scale."""

    def test_ggm_row_count(self):
        """One row per replication, grid point, method and metric."""
        cfg = ggm_config()
        results, summary = run_experiment(cfg)
        assert list(results.columns) == RESULT_COLUMNS
        assert len(results) == 2 * 2 * 2 * len(GGM_METRICS)
        assert set(results["method"]) == {"pcen", "separate"}
        assert len(summary) == 2 * 2 * len(GGM_METRICS)
        assert (summary["count"] == 2).all()

    def test_ggm_metric_values(self):
        """Rates lie in [0, 1] and only clustered fits report partition recovery."""
        results, _ = run_experiment(ggm_config())
        tpr = results[results["metric"] == "tpr"]["value"]
        assert ((tpr >= 0) & (tpr <= 1)).all()
        recovered = results[results["metric"] == "partition_recovered"]
        assert recovered[recovered["method"] == "separate"]["value"].isna().all()
        assert recovered[recovered["method"] == "pcen"]["value"].isin([0.0, 1.0]).all()

    def test_qda_columns(self):
        """The QDA scenario reports error rates for every method, oracle rules once per replication."""
        results, _ = run_experiment(qda_config())
        assert set(results["metric"]) == set(QDA_METRICS)
        assert set(results["method"]) == {"crf", "rf", "ridge", "oracle", "tc"}
        assert len(results) == 2 * (3 + 2) * len(QDA_METRICS)
        errors = results[results["metric"] == "error_rate"]["value"]
        assert ((errors >= 0) & (errors <= 1)).all()
        oracle = results[results["method"] == "oracle"]
        assert (oracle["Q"] == 0).all() and oracle["lambda1"].isna().all()

    def test_oracle_recovers_truth(self):
        """The oracle rule has exact support and zero estimation error."""
        results, _ = run_experiment(qda_config(reps=1))
        oracle = results[results["method"] == "oracle"].set_index("metric")["value"]
        assert oracle["frob_error"] == 0.0
        assert oracle["tpr"] == 1.0

    def test_deterministic(self):
        """Same configuration, identical results, serial or parallel."""
        first, _ = run_experiment(ggm_config())
        second, _ = run_experiment(ggm_config())
        parallel, _ = run_experiment(ggm_config(workers=2))
        assert first.equals(second)
        assert first.equals(parallel)

    def test_replications_differ(self):
        """Each replication draws fresh data."""
        results, _ = run_experiment(ggm_config())
        frob = results[(results["metric"] == "frob_error") & (results["method"] == "separate")]
        assert frob["value"].nunique() > 1

    def test_failures_are_recorded(self):
        """A grid point the solver rejects leaves NaN metrics and a ledger entry."""
        recovery = ErrorRecoveryManager("experiments_test")
        results, _ = run_experiment(ggm_config(Q_values=(5,)), recovery=recovery)
        pcen = results[results["method"] == "pcen"]
        assert pcen["value"].isna().all()
        assert results[results["method"] == "separate"]["value"].notna().any()
        assert recovery.get_error_statistics()["total_errors"] == 2 * 2

    def test_tune_mode(self):
        """Tuned runs report one selected point per method and replication."""
        cfg = ggm_config(reps=1, tune=True)
        cfg = cfg.model_copy(update={"grid": cfg.grid.model_copy(update={"folds": 2})})
        results, _ = run_experiment(cfg)
        assert len(results) == 2 * len(GGM_METRICS)
        separate = results[results["method"] == "separate"]
        assert (separate["lambda2"] == 0.0).all() and (separate["Q"] == 1).all()

    def test_tuning_failure_is_recorded(self):
        """A method whose whole grid fails reports NaN metrics instead of a fitted point."""
        cfg = ggm_config(reps=1, Q_values=(5,), tune=True)
        cfg = cfg.model_copy(update={"grid": cfg.grid.model_copy(update={"folds": 2})})
        recovery = ErrorRecoveryManager("experiments_test")
        results, _ = run_experiment(cfg, recovery=recovery)
        pcen = results[results["method"] == "pcen"]
        assert len(pcen) == len(GGM_METRICS)
        assert pcen["value"].isna().all() and pcen["lambda1"].isna().all()
        assert results[results["method"] == "separate"]["value"].notna().any()
        assert recovery.get_error_statistics()["error_counts"] == {"ParameterError": 1}


class TestSummarize:
    """Mean and standard error."""

    def test_mean_and_se(self):
        """Standard error is the sample deviation over root count."""
        results, _ = run_experiment(ggm_config())
        values = [1.0, 3.0]
        results = results.head(2).copy()
        results["metric"] = "stp"
        results["method"] = "pcen"
        results["lambda2"] = 0.0
        results["value"] = values
        summary = summarize(results)
        assert len(summary) == 1
        row = summary.iloc[0]
        assert row["mean"] == pytest.approx(2.0)
        assert row["se"] == pytest.approx(np.std(values, ddof=1) / np.sqrt(2))
        assert row["count"] == 2


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
