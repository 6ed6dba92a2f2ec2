"""
Multi-sample averaging and the cross-sample correlation diagnostics.
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
import pandas as pd

from models.errors import PoolShapeError, SeriesValidationError
from models.series import AveragedSeries, SamplePool, derive_seed
from services.report_export_service import write_frame

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    labels: List[str]
    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float, copy=True)
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "labels", list(self.labels))
        if entries.shape != (len(self.labels), len(self.labels)):
            raise SeriesValidationError("correlation matrix shape does not match its labels")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.entries, index=self.labels, columns=self.labels)


def average_pool(pool: SamplePool, sample_ids: Sequence[str]) -> List[AveragedSeries]:
    """Per-term, per-period mean over the selected samples (not rounded, not re-normalized)."""
    sample_ids = list(sample_ids)
    if not sample_ids:
        raise PoolShapeError("cannot average an empty sample subset")
    if len(set(sample_ids)) != len(sample_ids):
        raise PoolShapeError("sample subset contains duplicate ids")
    unknown = [sid for sid in sample_ids if sid not in pool.sample_ids]
    if unknown:
        raise PoolShapeError(f"unknown sample ids: {', '.join(unknown)}")

    # pool order, so the mean does not depend on how the subset was listed
    members = [sid for sid in pool.sample_ids if sid in set(sample_ids)]
    rows = [pool.row(sid) for sid in members]
    averaged = []
    for j, query in enumerate(pool.query_set):
        stacked = np.vstack([row[j].values for row in rows])
        averaged.append(AveragedSeries(query=query, values=stacked.mean(axis=0), member_ids=members))
    return averaged


def disjoint_group_averages(pool: SamplePool, group_size: int, n_groups: int,
                            seed: int) -> List[List[AveragedSeries]]:
    """Split a seeded permutation of the samples into disjoint groups and average each."""
    if group_size < 1 or n_groups < 1:
        raise PoolShapeError("group_size and n_groups must be >= 1")
    if group_size * n_groups > pool.n_samples:
        raise PoolShapeError(
            f"{n_groups} groups of {group_size} need {group_size * n_groups} samples, pool has {pool.n_samples}"
        )
    rng = np.random.default_rng(derive_seed(seed, "groups"))
    order = rng.permutation(pool.n_samples)
    groups = []
    for g in range(n_groups):
        ids = [pool.sample_ids[i] for i in order[g * group_size: (g + 1) * group_size]]
        groups.append(average_pool(pool, ids))
    return groups


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise SeriesValidationError("pearson needs two vectors of equal length")
    if len(x) < 2:
        raise SeriesValidationError("pearson needs at least 2 observations")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise SeriesValidationError("correlation is undefined for a constant series")
    r = float(dx @ dy) / np.sqrt(sxx * syy)
    return float(np.clip(r, -1.0, 1.0))


def correlation_matrix(series_list: Sequence) -> CorrelationMatrix:
    """Pairwise Pearson correlations; labels are the series' sample ids."""
    if len(series_list) < 2:
        raise SeriesValidationError("a correlation matrix needs at least 2 series")
    n = len(series_list)
    entries = np.eye(n)
    for a in range(n):
        for b in range(a + 1, n):
            entries[a, b] = entries[b, a] = pearson(series_list[a].values, series_list[b].values)
    return CorrelationMatrix(labels=[s.sample_id for s in series_list], entries=entries)


def mean_off_diagonal(matrix: CorrelationMatrix) -> float:
    entries = matrix.entries
    n = entries.shape[0]
    if n < 2:
        raise SeriesValidationError("no off-diagonal entries")
    mask = ~np.eye(n, dtype=bool)
    return float(entries[mask].mean())


def term_correlations(pool: SamplePool, term_index: int) -> CorrelationMatrix:
    """Correlation across the samples of one term."""
    return correlation_matrix([row[term_index] for row in pool.samples])


def group_correlations(groups: Sequence[Sequence[AveragedSeries]], term_index: int) -> CorrelationMatrix:
    """Correlation across the group averages of one term, labeled g1, g2, ..."""
    averaged = [group[term_index] for group in groups]
    matrix = correlation_matrix(averaged)
    return CorrelationMatrix(labels=[f"g{i + 1}" for i in range(len(averaged))], entries=matrix.entries)


def export_correlation_matrix(matrix: CorrelationMatrix, path: str):
    """Square CSV with the labels as header row and first column."""
    frame = matrix.to_frame()
    frame.index.name = "sample"
    write_frame(frame, path, index=True, float_format="%.6f")


def averages_frame(averaged: Sequence[AveragedSeries]) -> pd.DataFrame:
    frames = []
    for series in averaged:
        frames.append(pd.DataFrame({
            "term": series.term,
            "period": series.grid.labels(),
            "value": series.values,
            "n_members": len(series.member_ids),
        }))
    return pd.concat(frames, ignore_index=True)


def export_averages(averaged: Sequence[AveragedSeries], path: str):
    write_frame(averages_frame(averaged), path)
