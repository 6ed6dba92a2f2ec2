"""
Rolling-window vintages: the same term downloaded for windows shifted by
`step` periods, each a fresh sample normalized within its own window.
"""

import logging
from dataclasses import dataclass
from datetime import date, timedelta
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from models.errors import VintageError
from models.series import AveragedSeries, TermQuery, TimeGrid, format_period
from services.aggregate_service import CorrelationMatrix, pearson
from services.sampler_service import LatentPanel, SamplerConfig, draw_series

logger = logging.getLogger(__name__)

DEFAULT_N_VINTAGES = 3
DEFAULT_STEP = 1


@dataclass(frozen=True, eq=False)
class VintageSet:
    base_query: TermQuery
    shift_months: Tuple[int, ...]
    vintages: Tuple
    overlap_periods: Tuple[date, ...]

    def __post_init__(self):
        object.__setattr__(self, "shift_months", tuple(self.shift_months))
        object.__setattr__(self, "vintages", tuple(self.vintages))
        object.__setattr__(self, "overlap_periods", tuple(self.overlap_periods))
        if len(self.vintages) != len(self.shift_months) or not self.vintages:
            raise VintageError("one vintage is needed per shift")

    @property
    def overlap_grid(self) -> TimeGrid:
        if len(self.overlap_periods) < 2:
            raise VintageError("vintage windows overlap in fewer than 2 periods")
        return TimeGrid(self.overlap_periods, self.base_query.frequency)

    def overlap_values(self, vintage) -> np.ndarray:
        grid = vintage.grid
        start = grid.index_of(self.overlap_periods[0])
        return np.asarray(vintage.values[start: start + len(self.overlap_periods)], dtype=float)

    @property
    def labels(self) -> List[str]:
        return [v.sample_id for v in self.vintages]


def _check_layout(panel: LatentPanel, base_window: Tuple[int, int], n_vintages: int, step: int):
    start, end = base_window
    if n_vintages < 1:
        raise VintageError("n_vintages must be >= 1")
    if step < 1:
        raise VintageError(f"step must be a positive number of periods, got {step}")
    if start < 0 or end - start < 1:
        raise VintageError(f"base window [{start}, {end}] needs at least 2 periods")
    last_end = end + (n_vintages - 1) * step
    if last_end >= len(panel.grid):
        raise VintageError(
            f"shifted window ends at position {last_end}, beyond the panel grid of {len(panel.grid)} periods"
        )


def build_vintages(panel: LatentPanel, cfg: SamplerConfig, base_window: Tuple[int, int],
                   n_vintages: int = DEFAULT_N_VINTAGES, step: int = DEFAULT_STEP,
                   term_index: int = 0, set_index: int = 0) -> VintageSet:
    """
    Draw one fresh sample per shifted window. `base_window` is a pair of
    inclusive grid positions; vintage i covers it shifted by i * step.
    """
    _check_layout(panel, base_window, n_vintages, step)
    if not 0 <= term_index < panel.n_terms:
        raise VintageError(f"term_index {term_index} outside the panel's {panel.n_terms} terms")
    start, end = base_window
    vintages, shifts = [], []
    for i in range(n_vintages):
        shift = i * step
        window = panel.window(start + shift, end + shift)
        vintages.append(draw_series(
            window, term_index, cfg.sampling_fraction, (cfg.seed, "vintage", set_index, i),
            sample_id=f"s{set_index}v{i}", download_date=cfg.download_start + timedelta(days=i),
        ))
        shifts.append(shift)
    overlap = panel.grid.periods[start + (n_vintages - 1) * step: end + 1]
    logger.info(f"[Vintage] {panel.terms[term_index]!r}: {n_vintages} vintages, overlap {len(overlap)} periods")
    return VintageSet(base_query=panel.query(term_index, start, end), shift_months=shifts,
                      vintages=vintages, overlap_periods=overlap)


def build_vintage_sets(panel: LatentPanel, cfg: SamplerConfig, base_window: Tuple[int, int],
                       n_vintages: int = DEFAULT_N_VINTAGES, step: int = DEFAULT_STEP,
                       n_sets: int = 1, term_index: int = 0, n_jobs: int = 1) -> List[VintageSet]:
    """Independent repeated downloads of the same vintage layout."""
    if n_sets < 1:
        raise VintageError("n_sets must be >= 1")
    return Parallel(n_jobs=n_jobs)(
        delayed(build_vintages)(panel, cfg, base_window, n_vintages, step, term_index, s)
        for s in range(n_sets)
    )


def vintage_correlations(vintage_set: VintageSet) -> CorrelationMatrix:
    """Pearson correlations between vintages over their common periods only."""
    if len(vintage_set.overlap_periods) < 2:
        raise VintageError("vintage windows overlap in fewer than 2 periods")
    columns = [vintage_set.overlap_values(v) for v in vintage_set.vintages]
    n = len(columns)
    entries = np.eye(n)
    for a in range(n):
        for b in range(a + 1, n):
            entries[a, b] = entries[b, a] = pearson(columns[a], columns[b])
    return CorrelationMatrix(labels=vintage_set.labels, entries=entries)


def average_vintages(sets: Sequence[VintageSet]) -> VintageSet:
    """Average the matching vintages of several sets, shift by shift."""
    if not sets:
        raise VintageError("no vintage sets to average")
    first = sets[0]
    for other in sets[1:]:
        if other.shift_months != first.shift_months or other.overlap_periods != first.overlap_periods:
            raise VintageError("vintage sets have different shift structures")
        if other.base_query != first.base_query:
            raise VintageError("vintage sets are for different queries")
    averaged = []
    for i in range(len(first.shift_months)):
        members = [s.vintages[i] for s in sets]
        averaged.append(AveragedSeries(
            query=members[0].query,
            values=np.mean([m.values for m in members], axis=0),
            member_ids=[m.sample_id for m in members],
        ))
    return VintageSet(base_query=first.base_query, shift_months=first.shift_months,
                      vintages=averaged, overlap_periods=first.overlap_periods)


def peak_periods(vintage_set: VintageSet) -> List[date]:
    """Where each vintage reaches its maximum (100 for a single download)."""
    peaks = []
    for vintage in vintage_set.vintages:
        peaks.append(vintage.grid.periods[int(np.argmax(vintage.values))])
    return peaks


def vintages_frame(vintage_set: VintageSet) -> pd.DataFrame:
    frames = []
    for shift, vintage in zip(vintage_set.shift_months, vintage_set.vintages):
        grid = vintage.grid
        frames.append(pd.DataFrame({
            "vintage_id": vintage.sample_id,
            "shift": shift,
            "period": grid.labels(),
            "value": vintage.values,
        }))
    return pd.concat(frames, ignore_index=True)


def peaks_frame(vintage_set: VintageSet) -> pd.DataFrame:
    frequency = vintage_set.base_query.frequency
    return pd.DataFrame({
        "vintage_id": vintage_set.labels,
        "shift": vintage_set.shift_months,
        "peak_period": [format_period(p, frequency) for p in peak_periods(vintage_set)],
    })
