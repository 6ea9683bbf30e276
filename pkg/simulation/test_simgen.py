"""
Tests for the simulation data generators.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from shared.utils.error_handling import ParameterError
from .simgen import (
    Scenario,
    ScenarioName,
    as_labeled_rows,
    build_E,
    build_R,
    erdos_renyi_adjacency,
    linear_spectrum,
    make_scenario,
    make_truth,
    mvn_sample,
    remove_edges,
    support_difference,
)


def assert_valid_precision(omega, unit_variance=True):
    np.testing.assert_array_equal(omega, omega.T)
    assert np.linalg.eigvalsh(omega)[0] > 0
    if unit_variance:
        assert np.max(np.abs(np.diag(np.linalg.inv(omega)) - 1.0)) <= 1e-8


def off_diagonal_support(M):
    return (np.abs(M) > 0) & ~np.eye(M.shape[0], dtype=bool)


class TestGraphs:
    """Random adjacency matrices and edge removal."""

    def test_empty_graph(self):
        """No edges gives the zero matrix."""
        A = erdos_renyi_adjacency(5, 0, np.random.default_rng(0))
        np.testing.assert_array_equal(A, np.zeros((5, 5)))

    def test_complete_graph(self):
        """All p(p-1)/2 edges gives the complete graph."""
        A = erdos_renyi_adjacency(5, 10, np.random.default_rng(0))
        np.testing.assert_array_equal(A, np.ones((5, 5)) - np.eye(5))

    def test_edge_count_and_symmetry(self):
        """Exactly n_edges distinct edges, symmetric, empty diagonal."""
        rng = np.random.default_rng(1)
        for _ in range(20):
            A = erdos_renyi_adjacency(6, 5, rng)
            edges = sum(1 for j in range(6) for k in range(j + 1, 6) if A[j, k] == 1)
            assert edges == 5
            np.testing.assert_array_equal(A, A.T)
            assert np.all(np.diag(A) == 0)

    def test_edge_count_out_of_range(self):
        """More edges than pairs is a parameter error."""
        with pytest.raises(ParameterError):
            erdos_renyi_adjacency(4, 7, np.random.default_rng(0))

    def test_remove_edges(self):
        """Removal deletes exactly k existing edges."""
        rng = np.random.default_rng(2)
        A = erdos_renyi_adjacency(8, 10, rng)
        B = remove_edges(A, 4, rng)
        assert np.sum(B) == np.sum(A) - 8
        assert np.all(B <= A)
        with pytest.raises(ParameterError):
            remove_edges(A, 11, rng)


class TestPrecisionBuilders:
    """E and R constructions."""

    def test_no_edges_gives_identity(self):
        """An empty graph produces the identity."""
        omega = build_E(np.zeros((4, 4)), 4, np.random.default_rng(0))
        np.testing.assert_allclose(omega, np.eye(4), atol=1e-15)

    @pytest.mark.parametrize("p", [10, 20])
    def test_build_E_valid(self, p):
        """SPD, unit variances and support equal to the graph."""
        rng = np.random.default_rng(p)
        for _ in range(20):
            A = erdos_renyi_adjacency(p, p, rng)
            omega = build_E(A, p, rng)
            assert_valid_precision(omega)
            np.testing.assert_array_equal(off_diagonal_support(omega), A == 1)

    def test_build_R_keeps_support(self):
        """Zero perturbation on the base support keeps the support."""
        rng = np.random.default_rng(3)
        A = erdos_renyi_adjacency(10, 10, rng)
        base = build_E(A, 10, rng)
        omega = build_R(A, base, (0.0, 0.0), rng)
        np.testing.assert_array_equal(off_diagonal_support(omega), off_diagonal_support(base))
        assert_valid_precision(omega)

    @pytest.mark.parametrize("p", [10, 20])
    def test_build_R_drops_removed_edges(self, p):
        """Removing four edges removes exactly those entries from the support."""
        rng = np.random.default_rng(4 + p)
        for _ in range(20):
            A = erdos_renyi_adjacency(p, p, rng)
            base = build_E(A, p, rng)
            reduced = remove_edges(A, 4, rng)
            omega = build_R(reduced, base, (-0.01, 0.01), rng)
            assert_valid_precision(omega)
            np.testing.assert_array_equal(off_diagonal_support(omega), reduced == 1)
            assert support_difference(base, omega) == 4


class TestSampling:
    """Gaussian draws from a precision matrix."""

    def test_mean_within_clt_bound(self):
        """Standard normal rows have small empirical means."""
        X = mvn_sample(np.zeros(5), np.eye(5), 10_000, np.random.default_rng(5))
        assert np.all(np.abs(X.mean(axis=0)) <= 4 / np.sqrt(10_000))

    def test_empty_sample(self):
        """n = 0 gives an empty matrix."""
        assert mvn_sample(np.zeros(3), np.eye(3), 0, np.random.default_rng(0)).shape == (0, 3)

    def test_deterministic(self):
        """Same seed, same draws."""
        first = mvn_sample(np.ones(3), 2 * np.eye(3), 7, np.random.default_rng(6))
        second = mvn_sample(np.ones(3), 2 * np.eye(3), 7, np.random.default_rng(6))
        np.testing.assert_array_equal(first, second)

    def test_covariance_matches_inverse(self):
        """The sample covariance of 1e5 draws approaches omega^-1."""
        rng = np.random.default_rng(7)
        omega = build_E(erdos_renyi_adjacency(6, 6, rng), 6, rng)
        X = mvn_sample(np.zeros(6), omega, 100_000, rng)
        assert np.max(np.abs(np.cov(X.T) - np.linalg.inv(omega))) <= 0.02


class TestScenarios:
    """The four named scenarios."""

    @pytest.mark.parametrize("name", ["block_er", "blockdiag_er", "blockdiag_identity"])
    def test_ggm_truth_valid(self, name):
        """Every true precision is SPD with unit variances."""
        truth = make_truth(Scenario(name=name, p=10, n_per_class=0, rng_seed=1))
        assert truth.C == 4
        assert truth.partition_true.same_as(truth.partition_true.canonical())
        assert truth.partition_true.assignment == (0, 0, 1, 1)
        for omega in truth.omegas_true.omegas:
            assert_valid_precision(omega)
        np.testing.assert_array_equal(truth.mus_true, np.zeros((4, 10)))

    def test_block_er_support_difference(self):
        """The first pair differs in eight edges and has no off-block entries."""
        for seed in range(10):
            truth = make_truth(Scenario(name="block_er", p=10, n_per_class=0, rng_seed=seed))
            omega1, omega2 = truth.omegas_true[0], truth.omegas_true[1]
            assert support_difference(omega1, omega2) == 8
            for omega in (omega1, omega2):
                assert np.all(omega[:5, 5:] == 0)

    def test_blockdiag_er_shared_zeros(self):
        """Entries outside the diagonal blocks are zero in all four matrices."""
        truth = make_truth(Scenario(name="blockdiag_er", p=20, n_per_class=0, rng_seed=2))
        for omega in truth.omegas_true.omegas:
            assert np.all(omega[:10, 10:] == 0)
        assert support_difference(truth.omegas_true[0], truth.omegas_true[1]) == 6

    def test_blockdiag_identity_lower_block(self):
        """The second block of every matrix is the identity."""
        truth = make_truth(Scenario(name="blockdiag_identity", p=10, n_per_class=0, rng_seed=3))
        for omega in truth.omegas_true.omegas:
            np.testing.assert_allclose(omega[5:, 5:], np.eye(5), atol=1e-12)

    def test_qda_equal_pair(self):
        """rho = 0.45 makes the last two precisions equal."""
        truth = make_truth(Scenario(name="qda_dense", p=20, n_per_class=0, rho=0.45))
        np.testing.assert_array_equal(truth.omegas_true[2], truth.omegas_true[3])
        for omega in truth.omegas_true.omegas:
            assert_valid_precision(omega, unit_variance=False)

    def test_qda_means_and_spectrum(self):
        """Means are scaled log(p)/p constants; the dense covariances have the linear spectrum."""
        p = 20
        truth = make_truth(Scenario(name="qda_dense", p=p, n_per_class=0, rho=0.4))
        level = np.log(p) / p
        np.testing.assert_allclose(truth.mus_true[:, 0], [20 * level, -10 * level, 10 * level, -20 * level])
        eig = np.sort(np.linalg.eigvalsh(np.linalg.inv(truth.omegas_true[0])))[::-1]
        np.testing.assert_allclose(eig, linear_spectrum(1000.0, 100.0, p), rtol=1e-8)

    def test_data_shapes_and_determinism(self):
        """n_per_class rows per class, identical for identical seeds."""
        s = Scenario(name="block_er", p=10, n_per_class=15, rng_seed=4)
        truth, data = make_scenario(s)
        again_truth, again = make_scenario(s)
        assert [m.shape for m in data] == [(15, 10)] * 4
        for first, second in zip(data, again):
            np.testing.assert_array_equal(first, second)
        np.testing.assert_array_equal(truth.omegas_true.omegas, again_truth.omegas_true.omegas)
        X, y = as_labeled_rows(data)
        assert X.shape == (60, 10)
        assert list(np.bincount(y)) == [15] * 4

    def test_replications_differ(self):
        """Different replication indices draw different truths."""
        s = Scenario(name="block_er", p=10, n_per_class=0, rng_seed=4)
        assert not np.array_equal(make_truth(s, 0).omegas_true.omegas, make_truth(s, 1).omegas_true.omegas)

    def test_bad_parameters(self):
        """Odd p, tiny p and missing rho are rejected."""
        with pytest.raises(ParameterError):
            make_truth(Scenario(name="block_er", p=11, n_per_class=5))
        with pytest.raises(ParameterError):
            make_truth(Scenario(name="blockdiag_identity", p=6, n_per_class=5))
        with pytest.raises(ValidationError):
            Scenario(name="qda_dense", p=10, n_per_class=5)
        with pytest.raises(ValidationError):
            Scenario(name="qda_dense", p=10, n_per_class=5, rho=1.2)
        assert Scenario(name="qda_dense", p=10, n_per_class=5, rho=0.5).name == ScenarioName.QDA_DENSE


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
