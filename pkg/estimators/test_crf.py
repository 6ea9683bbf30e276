"""
Tests for the cluster ridge fusion estimator.
"""

import numpy as np
import pytest

from shared.utils.error_handling import InitializationError, ParameterError
from .crf import crf_block_eta, crf_fit, crf_inner_solve
from .model_core import ClassDataset, Partition, PenaltyConfig, crf_objective, initial_precisions
from .operators import ridge_precision_solve


def tridiagonal(p, diag, off):
    return diag * np.eye(p) + off * (np.eye(p, k=1) + np.eye(p, k=-1))


def sample_dataset(rng, omegas, n):
    X, y = [], []
    for c, omega in enumerate(omegas):
        p = omega.shape[0]
        X.append(rng.multivariate_normal(np.zeros(p), np.linalg.inv(omega), n))
        y.extend([c] * n)
    return ClassDataset.from_rows(np.vstack(X), np.array(y))


def planted_dataset(rng, p=10, n=200):
    """Two banded classes and two equicorrelated classes."""
    banded = tridiagonal(p, 2.0, 0.8)
    dense = np.eye(p) + 0.1 * np.ones((p, p))
    return sample_dataset(rng, [banded, banded, dense, dense], n)


def joint_gradient(data, omegas, part, cfg):
    """Gradient of the fixed-partition CRF objective for every class."""
    grads = []
    for c in range(data.C):
        members = [m for m in part.blocks()[part.assignment[c]] if m != c]
        card = len(members) + 1
        g = data.n[c] * (data.covariances[c] - np.linalg.inv(omegas[c])) + cfg.lambda1 * omegas[c]
        for m in members:
            g = g + cfg.lambda2 / card * (omegas[c] - omegas[m])
        grads.append(g)
    return np.array(grads)


class TestCrfInnerSolve:
    """Fixed-partition blockwise ridge fusion."""

    def test_block_eta(self):
        """(lambda1 + lambda2 (card-1)/card) / (2 n_c)."""
        cfg = PenaltyConfig(lambda1=1.0, lambda2=4.0, Q=1)
        assert crf_block_eta(cfg, 10, 2) == pytest.approx((1.0 + 2.0) / 20.0)
        assert crf_block_eta(cfg, 10, 1) == pytest.approx(1.0 / 20.0)

    def test_no_fusion_is_separate_ridge(self):
        """lambda2 = 0 gives per-class ridge solves in a single pass."""
        rng = np.random.default_rng(0)
        data = sample_dataset(rng, [np.eye(3)] * 3, 30)
        cfg = PenaltyConfig(lambda1=2.0, lambda2=0.0, Q=1)
        result = crf_inner_solve(data, Partition.single(3), cfg)
        assert result.sweeps == 1
        for c in range(3):
            expected = ridge_precision_solve(data.covariances[c], 2.0 / (2 * data.n[c]))
            np.testing.assert_allclose(result.precisions[c], expected, atol=1e-12)

    def test_singletons_ignore_fusion(self):
        """Singleton clusters reduce to the same separate ridge solves."""
        rng = np.random.default_rng(1)
        data = sample_dataset(rng, [np.eye(3)] * 3, 30)
        cfg = PenaltyConfig(lambda1=2.0, lambda2=50.0, Q=3)
        result = crf_inner_solve(data, Partition.singletons(3), cfg)
        for c in range(3):
            expected = ridge_precision_solve(data.covariances[c], 1.0 / data.n[c])
            np.testing.assert_allclose(result.precisions[c], expected, atol=1e-12)

    def test_joint_stationarity(self):
        """Tight blockwise descent reaches a stationary point of the joint objective."""
        rng = np.random.default_rng(2)
        data = sample_dataset(rng, [tridiagonal(3, 1.5, 0.4), np.eye(3)], 20)
        part = Partition.single(2)
        cfg = PenaltyConfig(lambda1=1.0, lambda2=5.0, Q=1, tol=1e-15, inner_max_iter=20000)
        result = crf_inner_solve(data, part, cfg)
        grads = joint_gradient(data, result.precisions.omegas, part, cfg)
        assert np.max(np.abs(grads)) <= 1e-4

    def test_sweeps_nonincreasing(self):
        """The cluster objective never increases across sweeps."""
        rng = np.random.default_rng(3)
        data = sample_dataset(rng, [tridiagonal(4, 2.0, 0.5), np.eye(4), np.eye(4)], 25)
        cfg = PenaltyConfig(lambda1=0.5, lambda2=20.0, Q=1)
        result = crf_inner_solve(data, Partition.single(3), cfg)
        trace = np.array(result.cluster_traces[0])
        assert np.all(np.diff(trace) <= 1e-8 * (1 + np.abs(trace[1:])))

    def test_lambda1_required(self):
        """lambda1 = 0 is rejected for fits."""
        rng = np.random.default_rng(4)
        data = sample_dataset(rng, [np.eye(2)] * 2, 10)
        with pytest.raises(ParameterError):
            crf_inner_solve(data, Partition.single(2), PenaltyConfig(lambda1=0.0, lambda2=1.0, Q=1))


class TestCrfFit:
    """Outer alternation with ridge updates."""

    def test_planted_partition_recovered(self):
        """Banded and equicorrelated pairs are separated."""
        data = planted_dataset(np.random.default_rng(10))
        cfg = PenaltyConfig(lambda1=1.0, lambda2=50.0, Q=2)
        precisions, partition, report = crf_fit(data, cfg, rng_seed=0)
        assert partition.same_as(Partition((0, 0, 1, 1), 2))
        assert report.converged
        for omega in precisions.omegas:
            np.testing.assert_array_equal(omega, omega.T)
            assert np.linalg.eigvalsh(omega)[0] > 0

    def test_trace_nonincreasing(self):
        """The objective decreases after every partition and precision update."""
        rng = np.random.default_rng(11)
        omegas = [tridiagonal(5, 2.0, 0.7), np.eye(5), tridiagonal(5, 1.5, 0.3), 2 * np.eye(5), np.eye(5)]
        data = sample_dataset(rng, omegas, 40)
        cfg = PenaltyConfig(lambda1=0.5, lambda2=30.0, Q=2)
        precisions, partition, report = crf_fit(data, cfg, rng_seed=3)
        trace = np.array(report.objective_trace)
        assert len(trace) >= 2
        assert np.all(np.diff(trace) <= 1e-8 * (1 + np.abs(trace[1:])))
        assert crf_objective(data, precisions, partition, cfg) == pytest.approx(trace[-1], rel=1e-12)

    def test_single_cluster(self):
        """Q = 1 keeps every class in one cluster and stops after one partition."""
        data = planted_dataset(np.random.default_rng(12), p=4, n=50)
        _, partition, report = crf_fit(data, PenaltyConfig(lambda1=1.0, lambda2=10.0, Q=1))
        assert partition.assignment == (0, 0, 0, 0)
        assert len(report.partition_history) == 1
        assert report.converged

    def test_no_fusion_any_partition(self):
        """lambda2 = 0 gives separate ridge estimates whatever the partition."""
        data = planted_dataset(np.random.default_rng(13), p=4, n=50)
        precisions, _, _ = crf_fit(data, PenaltyConfig(lambda1=1.0, lambda2=0.0, Q=2))
        for c in range(data.C):
            expected = ridge_precision_solve(data.covariances[c], 1.0 / (2 * data.n[c]))
            np.testing.assert_allclose(precisions[c], expected, atol=1e-12)

    def test_deterministic(self):
        """Same data, seed and settings give identical output."""
        data = planted_dataset(np.random.default_rng(14), p=4, n=50)
        cfg = PenaltyConfig(lambda1=1.0, lambda2=10.0, Q=2)
        first = crf_fit(data, cfg, rng_seed=7)
        second = crf_fit(data, cfg, rng_seed=7)
        np.testing.assert_array_equal(first.precisions.omegas, second.precisions.omegas)
        assert first.report.objective_trace == second.report.objective_trace

    def test_parallel_matches_serial(self):
        """Per-cluster solves give the same estimates with two workers."""
        data = planted_dataset(np.random.default_rng(15), p=4, n=50)
        serial = crf_fit(data, PenaltyConfig(lambda1=1.0, lambda2=10.0, Q=2), rng_seed=1)
        parallel = crf_fit(data, PenaltyConfig(lambda1=1.0, lambda2=10.0, Q=2, n_jobs=2), rng_seed=1)
        np.testing.assert_allclose(serial.precisions.omegas, parallel.precisions.omegas, atol=1e-12)
        assert serial.partition.same_as(parallel.partition)

    def test_zero_variance_rejected(self):
        """A constant variable in one class blocks the diagonal start."""
        rng = np.random.default_rng(16)
        X = rng.standard_normal((20, 3))
        X[:10, 1] = 4.0
        data = ClassDataset.from_rows(X, np.array([0] * 10 + [1] * 10))
        with pytest.raises(InitializationError, match="zero sample variance"):
            initial_precisions(data)
        with pytest.raises(InitializationError):
            crf_fit(data, PenaltyConfig(lambda1=1.0, lambda2=1.0, Q=1))

    def test_too_many_clusters(self):
        """Q > C is a parameter error."""
        data = planted_dataset(np.random.default_rng(17), p=3, n=20)
        with pytest.raises(ParameterError):
            crf_fit(data, PenaltyConfig(lambda1=1.0, lambda2=1.0, Q=5))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
