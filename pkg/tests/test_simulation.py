import unittest

import numpy as np

from models.errors import PoolShapeError, SimulationError
from models.lasso import SelectionRule
from services.simulation_service import (
    build_dgp,
    draw_beta,
    false_positives,
    merge_reports,
    run_experiment,
    run_setup,
    run_setup1,
    run_setup2,
    selection_accuracy,
    split_generator_estimator,
    table_frame,
)
from tests.fixtures import small_pool


class TestDgp(unittest.TestCase):

    def test_integer_coefficients_never_zero(self):
        """Test k=1 draws nonzero integers in [-10, 10]"""
        for seed in range(2000):
            beta = draw_beta(1, seed)
            self.assertEqual(len(beta), 5)
            self.assertTrue(np.all(beta == np.round(beta)))
            self.assertTrue(np.all(np.abs(beta) <= 10))
            self.assertTrue(np.all(beta != 0))

    def test_other_coefficient_kinds(self):
        """Test k=2 draws ones and twos and k=3 draws from [0, 1]"""
        for seed in range(200):
            self.assertTrue(set(draw_beta(2, seed)) <= {1.0, 2.0})
            beta = draw_beta(3, seed)
            self.assertTrue(np.all((beta >= 0) & (beta <= 1)))
        np.testing.assert_array_equal(draw_beta(3, 42), draw_beta(3, 42))
        with self.assertRaises(SimulationError):
            draw_beta(4, 0)

    def test_noise_matches_signal_variance(self):
        """Test the noise variance equals the signal variance on average"""
        X = np.random.default_rng(0).normal(size=(120, 5))
        beta = np.array([1.0, -2.0, 0.5, 3.0, 1.0])
        signal = X @ beta
        ratios = []
        for seed in range(1000):
            noise = build_dgp(X, beta, seed) - signal
            ratios.append(np.var(noise, ddof=1) / np.var(signal, ddof=1))
        self.assertAlmostEqual(float(np.mean(ratios)), 1.0, delta=0.02)

    def test_noise_scale(self):
        """Test the noise scale and its reproducibility"""
        X = np.random.default_rng(1).normal(size=(60, 2))
        beta = np.array([1.0, 1.0])
        np.testing.assert_array_equal(build_dgp(X, beta, 3), build_dgp(X, beta, 3))
        np.testing.assert_allclose(build_dgp(X, beta, 3, noise_scale=0.0), X @ beta)
        with self.assertRaises(SimulationError):
            build_dgp(np.ones((60, 2)), beta, 3)

    def test_accuracy_arithmetic(self):
        """Test recall and false-positive counts"""
        self.assertEqual(selection_accuracy({0, 1, 2}, {0, 1, 2, 3, 4}), 60.0)
        self.assertEqual(selection_accuracy(set(), {0, 1}), 0.0)
        self.assertEqual(false_positives({0, 7, 9}, {0, 1}), 2)
        with self.assertRaises(SimulationError):
            selection_accuracy({0}, set())

    def test_generator_estimator_split(self):
        """Test the two halves are disjoint and cover the pool"""
        for seed in range(20):
            generator, estimator = split_generator_estimator(14, np.random.default_rng(seed))
            self.assertEqual(len(generator), 7)
            self.assertEqual(len(estimator), 7)
            self.assertEqual(set(generator) | set(estimator), set(range(14)))
            self.assertFalse(set(generator) & set(estimator))


class TestSetups(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.pool = small_pool(n_samples=4, n_terms=8, n_periods=60, seed=1)

    def test_setup1_shape(self):
        """Test one replication selects once per non-generator sample and per DGP"""
        pool = small_pool(n_samples=14, n_terms=20, n_periods=120, seed=2)
        report = run_setup1(pool, 1, seed=0)
        self.assertEqual(len(report.results), 3)
        for result in report.results:
            self.assertEqual(len(result.selected_sets), 13)
            self.assertEqual(len(result.true_support), 5)
        frame = report.to_frame()
        self.assertEqual(list(frame.columns), ["US1", "US2", "US3"])
        self.assertEqual(list(frame.index), ["setup1"])

    def test_setup2_shape(self):
        """Test setup 2 runs a single selection per DGP"""
        report = run_setup2(self.pool, 2, seed=0)
        self.assertEqual(len(report.results), 6)
        for result in report.results:
            self.assertEqual(len(result.selected_sets), 1)
        replications = report.replications_frame()
        self.assertEqual(len(replications), 2)
        self.assertEqual(list(replications.columns[:3]), ["replication", "US1_recall", "US1_fp"])

    def test_results_are_reproducible(self):
        """Test the same seed gives the same accuracies with one or two workers"""
        a = run_setup(1, self.pool, 2, seed=5)
        b = run_setup(1, self.pool, 2, seed=5)
        c = run_setup(1, self.pool, 2, seed=5, n_jobs=2)
        self.assertEqual(a.accuracy, b.accuracy)
        self.assertEqual(a.accuracy, c.accuracy)
        self.assertEqual(a.false_positives, c.false_positives)
        self.assertEqual([r.selected_sets for r in a.results], [r.selected_sets for r in c.results])

    def test_noiseless_full_sample_recovers_support(self):
        """Test exact covariates and a noiseless target give near-perfect recall"""
        pool = small_pool(n_samples=4, n_terms=20, n_periods=120, seed=3, fraction=1.0)
        report = run_setup1(pool, 3, seed=0, noise_scale=0.0)
        self.assertGreaterEqual(np.mean(list(report.accuracy.values())), 90.0)

    def test_merge_and_table(self):
        """Test per-geo reports merge into one row per setup"""
        br_pool = small_pool(n_samples=4, n_terms=8, n_periods=60, seed=1, geo="BR")
        reports = run_experiment([self.pool, br_pool], [1, 2], 1, seed=0)
        frame = table_frame(reports)
        self.assertEqual(list(frame.index), ["setup1", "setup2"])
        self.assertEqual(list(frame.columns), ["BR1", "BR2", "BR3", "US1", "US2", "US3"])
        with self.assertRaises(SimulationError):
            merge_reports([reports[0], reports[0]])
        with self.assertRaises(SimulationError):
            run_experiment([self.pool, self.pool], [1], 1, seed=0)

    def test_bad_arguments(self):
        """Test setup, replication count and pool size checks"""
        with self.assertRaises(SimulationError):
            run_setup(3, self.pool, 1, seed=0)
        with self.assertRaises(SimulationError):
            run_setup(1, self.pool, 0, seed=0)
        with self.assertRaises(PoolShapeError):
            run_setup(1, small_pool(n_samples=3, n_terms=4), 1, seed=0)

    def test_cv_rule(self):
        """Test the simulation also runs with cross-validated selection"""
        report = run_setup2(self.pool, 1, seed=0, selection_rule=SelectionRule.parse("cv:3"))
        self.assertEqual(report.n_replications, 1)


if __name__ == '__main__':
    unittest.main()
