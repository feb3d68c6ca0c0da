import math
import unittest

import numpy as np

from lstm_anomaly_rules.detectors.gaussian import detect_gaussian, fit_gaussian, log_pd, tune_tau_g
from lstm_anomaly_rules.dto.fits import GaussianFit
from lstm_anomaly_rules.dto.reports import MatchSpec
from lstm_anomaly_rules.dto.series import ErrorSeries
from lstm_anomaly_rules.errors import DataError
from lstm_anomaly_rules.evaluation.matching import match_detections
from lstm_anomaly_rules.evaluation.metrics import compute_metrics

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def error_series(errors, start=0):
    return ErrorSeries(indices=np.arange(start, start + len(errors)), errors=errors)


class TestFitGaussian(unittest.TestCase):
    def test_biased_variance(self):
        fit = fit_gaussian(error_series([1.0, 2.0, 3.0, 4.0]))

        self.assertEqual(fit.mu, 2.5)
        self.assertEqual(fit.sigma2, 1.25)
        self.assertIsNone(fit.tau_g)

    def test_zero_variance(self):
        with self.assertRaises(DataError):
            fit_gaussian(error_series([0.3, 0.3, 0.3]))

    def test_too_few_errors(self):
        with self.assertRaises(DataError):
            fit_gaussian(error_series([0.3]))

    def test_log_pd_of_standard_normal(self):
        fit = GaussianFit(mu=0.0, sigma2=1.0)

        self.assertAlmostEqual(log_pd(fit, 0.0), -HALF_LOG_2PI, places=12)
        self.assertAlmostEqual(log_pd(fit, 2.0), -HALF_LOG_2PI - 2.0, places=12)
        np.testing.assert_allclose(log_pd(fit, np.array([0.0, 2.0])), [-HALF_LOG_2PI, -HALF_LOG_2PI - 2.0])

    def test_mle_on_large_sample(self):
        # N(2, 4) shifted by 10 so every draw is a valid error
        draws = np.random.default_rng(8).normal(2.0, 2.0, size=100000) + 10.0

        fit = fit_gaussian(error_series(draws))

        self.assertAlmostEqual(fit.mu, 12.0, delta=0.05)
        self.assertAlmostEqual(fit.sigma2, 4.0, delta=0.15)

    def test_error_halves_when_sample_quadruples(self):
        def rms_error(n):
            squared = []
            for seed in range(400):
                draws = np.random.default_rng(seed).normal(12.0, 2.0, size=n)
                squared.append((fit_gaussian(error_series(draws)).mu - 12.0) ** 2)
            return math.sqrt(np.mean(squared))

        ratio = rms_error(1000) / rms_error(4000)

        self.assertGreater(ratio, 1.6)
        self.assertLess(ratio, 2.5)

    def test_log_pd_closed_form(self):
        fit = GaussianFit(mu=0.0, sigma2=1.0)

        self.assertAlmostEqual(log_pd(fit, 0.0), -0.9189385, places=7)
        self.assertAlmostEqual(log_pd(fit, 3.0), -5.4189385, places=7)

    def test_log_pd_decreases_away_from_the_mean(self):
        fit = GaussianFit(mu=1.5, sigma2=0.7)
        distances = np.linspace(0.0, 10.0, 200)

        for side in (1.0, -1.0):
            with self.subTest(side=side):
                scores = log_pd(fit, fit.mu + side * distances)
                self.assertTrue(np.all(np.diff(scores) < 0.0))


class TestTuneTauG(unittest.TestCase):
    def setUp(self):
        self.fit = GaussianFit(mu=0.0, sigma2=1.0)
        errors = np.full(20, 0.1)
        errors[5] = 5.0
        self.val_errors = error_series(errors, start=10)

    def test_separates_the_labeled_error(self):
        tuned, report = tune_tau_g(self.fit, self.val_errors, {15})

        low = -HALF_LOG_2PI - 12.5
        high = -HALF_LOG_2PI - 0.005
        self.assertAlmostEqual(tuned.tau_g, (low + high) / 2.0, places=12)
        self.assertEqual(report.f1, 1.0)
        self.assertEqual(report.counts.false_positives, 0)
        self.assertEqual(report.regulator, "tau_g")

    def test_labels_outside_validation_are_ignored(self):
        tuned, _ = tune_tau_g(self.fit, self.val_errors, {3, 15, 99})

        self.assertEqual(detect_gaussian(tuned, self.val_errors).flagged_indices.tolist(), [15])

    def test_tolerance_is_applied(self):
        _, report = tune_tau_g(self.fit, self.val_errors, {17}, MatchSpec(tolerance=2))
        self.assertEqual(report.f1, 1.0)

    def test_no_labels(self):
        with self.assertRaises(DataError):
            tune_tau_g(self.fit, self.val_errors, {3})

    def test_single_anomaly_example(self):
        # errors whose log-PDs under N(0, 1) are -30, -5 and -4
        scores = np.array([-30.0, -5.0, -4.0])
        errors = error_series(np.sqrt(-2.0 * (scores + HALF_LOG_2PI)))

        tuned, report = tune_tau_g(self.fit, errors, {0})

        self.assertGreaterEqual(tuned.tau_g, -30.0)
        self.assertLess(tuned.tau_g, -5.0)
        self.assertEqual((report.precision, report.recall, report.f1), (1.0, 1.0, 1.0))

    def test_tuned_f1_beats_every_threshold(self):
        rng = np.random.default_rng(9)
        for trial in range(30):
            errors = error_series(rng.exponential(size=12))
            labels = set(rng.choice(12, size=int(rng.integers(1, 4)), replace=False).tolist())
            scores = np.sort(log_pd(self.fit, errors.errors))
            candidates = np.concatenate([scores, (scores[:-1] + scores[1:]) / 2.0, [scores[-1] + 1.0]])

            _, best = tune_tau_g(self.fit, errors, labels)

            for tau in candidates:
                flags = detect_gaussian(self.fit.model_copy(update={"tau_g": float(tau)}), errors).flagged_indices
                report = compute_metrics(match_detections(flags, labels))
                with self.subTest(trial=trial, tau=float(tau)):
                    self.assertGreaterEqual(best.f1, report.f1)


class TestDetectGaussian(unittest.TestCase):
    def test_untuned_fit(self):
        with self.assertRaises(DataError):
            detect_gaussian(GaussianFit(mu=0.0, sigma2=1.0), error_series([0.1, 0.2]))

    def test_flags_scores_below_threshold(self):
        fit = GaussianFit(mu=0.0, sigma2=1.0, tau_g=-HALF_LOG_2PI - 2.0)

        result = detect_gaussian(fit, error_series([0.0, 1.9, 2.0, 2.1, 3.0]))

        self.assertEqual(result.detector, "gaussian")
        self.assertEqual(result.flagged.tolist(), [0, 0, 0, 1, 1])
        self.assertEqual(result.threshold, fit.tau_g)

    def test_inverted_threshold(self):
        fit = GaussianFit(mu=0.0, sigma2=1.0, tau_g=-5.0)
        boundary = math.sqrt(2.0 * (5.0 - HALF_LOG_2PI))
        errors = [0.0, 1.0, 2.8, 2.85, 2.86, 2.9, 4.0]

        result = detect_gaussian(fit, error_series(errors))

        self.assertAlmostEqual(boundary, 2.8569, delta=1e-4)
        self.assertEqual(result.flagged_indices.tolist(), [i for i, x in enumerate(errors) if x > boundary])
        self.assertEqual(result.flagged_indices.tolist(), [4, 5, 6])

    def test_extreme_thresholds(self):
        errors = error_series([0.0, 0.5, 3.0, 7.0])
        fit = GaussianFit(mu=0.0, sigma2=1.0)

        nothing = detect_gaussian(fit.model_copy(update={"tau_g": -math.inf}), errors)
        everything = detect_gaussian(fit.model_copy(update={"tau_g": log_pd(fit, 0.0) + 1.0}), errors)

        self.assertEqual(nothing.flagged.sum(), 0)
        self.assertEqual(everything.flagged.sum(), 4)

    def test_flags_grow_with_threshold(self):
        fit = GaussianFit(mu=0.0, sigma2=1.0)
        errors = error_series(np.random.default_rng(10).exponential(size=300))
        taus = np.linspace(-20.0, 0.0, 41)

        flag_sets = [detect_gaussian(fit.model_copy(update={"tau_g": float(tau)}), errors).flag_set for tau in taus]

        for lower, higher in zip(flag_sets, flag_sets[1:]):
            self.assertLessEqual(lower, higher)
