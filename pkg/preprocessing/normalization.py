import logging

import numpy as np

from models.errors import NormalizationError, SeriesValidationError
from models.series import SampleSeries

logger = logging.getLogger(__name__)


def round_half_away(values: np.ndarray) -> np.ndarray:
    """Round to the nearest integer, ties away from zero (np.round rounds ties to even)."""
    values = np.asarray(values, dtype=float)
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


def normalize(raw_term_counts, raw_total_counts) -> np.ndarray:
    """
    Turn raw search counts into a Trends-style 0-100 index.

    Each period's count is divided by the total searches of that period,
    then the shares are scaled so the largest one maps to 100 and rounded
    to integers. An all-zero share vector maps to all zeros.
    """
    term = np.asarray(raw_term_counts, dtype=float)
    total = np.asarray(raw_total_counts, dtype=float)

    if term.ndim != 1 or total.ndim != 1 or term.shape != total.shape:
        raise NormalizationError(
            f"term and total vectors must have the same length (got {term.shape} and {total.shape})"
        )
    if not (np.all(np.isfinite(term)) and np.all(np.isfinite(total))):
        raise NormalizationError("counts must be finite")
    bad = np.flatnonzero(total <= 0)
    if bad.size:
        raise NormalizationError(f"total count must be positive (period index {bad[0]})")
    bad = np.flatnonzero(term < 0)
    if bad.size:
        raise NormalizationError(f"term count must be nonnegative (period index {bad[0]})")
    bad = np.flatnonzero(term > total)
    if bad.size:
        raise NormalizationError(f"term count exceeds total (period index {bad[0]})")

    shares = term / total
    peak = shares.max()
    if peak == 0:
        return np.zeros_like(shares)
    return round_half_away(100.0 * shares / peak)


def assert_series_valid(series: SampleSeries) -> SampleSeries:
    """Return `series` unchanged if every SampleSeries invariant holds."""
    values = series.values
    grid_length = len(series.grid)
    if values.ndim != 1 or len(values) != grid_length:
        raise SeriesValidationError(
            f"series has {values.size} values but its grid has {grid_length} periods"
        )
    if series.low_volume.shape != values.shape:
        raise SeriesValidationError("low-volume mask does not match series length")
    for i, value in enumerate(values):
        if not np.isfinite(value):
            raise SeriesValidationError("value is not finite", i)
        if value < 0 or value > 100:
            raise SeriesValidationError(f"value {value:g} outside bound [0, 100]", i)
    if values.max() > 0 and values.max() != 100:
        raise SeriesValidationError(
            f"series maximum is {values.max():g}, normalized series must peak at 100",
            int(np.argmax(values)),
        )
    return series
