import unittest

import numpy as np

from lstm_anomaly_rules.dto.series import ErrorSeries, SplitSpec, TimeSeries
from lstm_anomaly_rules.errors import DataError
from lstm_anomaly_rules.series.core import (
    absolute_errors,
    concat_segments,
    empirical_quantile,
    make_windows,
    split,
    split_boundaries,
)


def make_series(n, labels=None):
    return TimeSeries(
        name="test",
        timestamps=np.arange(n),
        values=np.arange(n, dtype=float) * 1.5,
        labels=labels,
    )


class TestSplit(unittest.TestCase):
    def test_split_lengths(self):
        train, validation, test = split(make_series(10), SplitSpec(train_fraction=0.6, validation_fraction=0.2, test_fraction=0.2))

        self.assertEqual([len(train), len(validation), len(test)], [6, 2, 2])
        self.assertEqual([train.offset, validation.offset, test.offset], [0, 6, 8])

    def test_remainder_goes_to_test(self):
        bounds = split_boundaries(2382, SplitSpec())

        self.assertEqual(bounds.train, [0, 1191])
        self.assertEqual(bounds.validation, [1191, 1786])
        self.assertEqual(bounds.test, [1786, 2382])

    def test_anomaly_in_training_segment(self):
        with self.assertRaises(DataError) as raised:
            split(make_series(10, labels={2}), SplitSpec(train_fraction=0.6, validation_fraction=0.2, test_fraction=0.2))

        self.assertIn("anomaly in training segment", str(raised.exception))

    def test_labels_move_to_their_segment(self):
        _, validation, test = split(make_series(10, labels={7, 9}), SplitSpec(train_fraction=0.6, validation_fraction=0.2, test_fraction=0.2))

        self.assertEqual(validation.label_set, {1})
        self.assertEqual(test.label_set, {1})
        self.assertEqual(test.parent_labels, {9})

    def test_too_short(self):
        with self.assertRaises(DataError):
            split(make_series(2), SplitSpec())

    def test_concat_reproduces_series(self):
        series = make_series(37, labels={20, 31})
        restored = concat_segments(split(series, SplitSpec()))

        np.testing.assert_array_equal(restored.values, series.values)
        np.testing.assert_array_equal(restored.timestamps, series.timestamps)
        self.assertEqual(restored.label_set, series.label_set)


class TestMakeWindows(unittest.TestCase):
    def test_enumeration(self):
        series = TimeSeries(timestamps=[0, 1, 2, 3], values=[1.0, 2.0, 3.0, 4.0])
        windows = make_windows(series, 2, 1)

        np.testing.assert_array_equal(windows.inputs, [[1, 2], [2, 3]])
        np.testing.assert_array_equal(windows.targets, [[3], [4]])
        np.testing.assert_array_equal(windows.origin_indices, [2, 3])

    def test_count(self):
        self.assertEqual(len(make_windows(make_series(100), 8, 5)), 88)

    def test_too_short(self):
        with self.assertRaises(DataError):
            make_windows(make_series(5), 4, 2)

    def test_windows_tile_the_parent_series(self):
        series = make_series(30)
        segment = series.segment(10, 30)
        windows = make_windows(segment, 3, 2)

        for inputs, targets, origin in zip(windows.inputs, windows.targets, windows.origin_indices):
            np.testing.assert_array_equal(inputs, series.values[origin - 3:origin])
            np.testing.assert_array_equal(targets, series.values[origin:origin + 2])

    def test_stride(self):
        windows = make_windows(make_series(100), 8, 5, stride=4)

        self.assertEqual(len(windows), (100 - 8 - 5) // 4 + 1)
        np.testing.assert_array_equal(windows.origin_indices[:3], [8, 12, 16])


class TestAbsoluteErrors(unittest.TestCase):
    def test_arithmetic(self):
        np.testing.assert_allclose(absolute_errors([3, 5], [2.5, 6]).errors, [0.5, 1.0])
        np.testing.assert_allclose(absolute_errors([-1, 2], [1, -2]).errors, [2.0, 4.0])

    def test_identical_sequences(self):
        values = np.linspace(-3, 3, 13)
        self.assertTrue(np.all(absolute_errors(values, values).errors == 0.0))

    def test_symmetric(self):
        rng = np.random.default_rng(3)
        a, b = rng.normal(size=50), rng.normal(size=50)
        np.testing.assert_array_equal(absolute_errors(a, b).errors, absolute_errors(b, a).errors)

    def test_length_mismatch(self):
        with self.assertRaises(DataError):
            absolute_errors([1.0, 2.0], [1.0])

    def test_horizon_column(self):
        actual = np.array([[1.0, 2.0], [3.0, 4.0]])
        predicted = np.array([[1.5, 0.0], [2.0, 0.0]])
        errors = absolute_errors(actual, predicted, horizon_index=1, indices=[5, 6])

        np.testing.assert_allclose(errors.errors, [2.0, 4.0])
        np.testing.assert_array_equal(errors.indices, [5, 6])

        with self.assertRaises(DataError):
            absolute_errors(actual, predicted, horizon_index=2)


class TestErrorSeries(unittest.TestCase):
    def test_restrict_and_concat(self):
        errors = ErrorSeries(indices=np.arange(3, 13), errors=np.linspace(0, 1, 10))
        parts = [errors.restrict(0, 6), errors.restrict(6, 9), errors.restrict(9, 100)]

        self.assertEqual([len(p) for p in parts], [3, 3, 4])
        np.testing.assert_array_equal(ErrorSeries.concat(parts).errors, errors.errors)

    def test_negative_errors_rejected(self):
        with self.assertRaises(ValueError):
            ErrorSeries(indices=[0, 1], errors=[0.1, -0.1])


class TestEmpiricalQuantile(unittest.TestCase):
    def test_interpolates_between_order_statistics(self):
        self.assertAlmostEqual(float(empirical_quantile([1, 2, 3, 4], 0.5)), 2.5)
        np.testing.assert_allclose(empirical_quantile(np.arange(1, 9), [0.25, 0.75]), [2.75, 6.25])

    def test_empty(self):
        with self.assertRaises(DataError):
            empirical_quantile([], 0.5)
