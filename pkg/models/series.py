"""
Domain value types shared by every part of the package: queries, time
grids, downloaded (or simulated) Trends series and pools of repeated
samples.

All types are immutable. Arrays held by them are marked read-only.
"""

import hashlib
import re
from dataclasses import dataclass, field
from datetime import date
from functools import lru_cache
from typing import Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd

from models.errors import PoolShapeError, SeriesValidationError

MONTHLY = "monthly"
DAILY = "daily"
FREQUENCIES = (MONTHLY, DAILY)

_PANDAS_FREQ = {MONTHLY: "MS", DAILY: "D"}


def derive_seed(*parts) -> int:
    """Hash any sequence of labels into a 64-bit seed.

    Every random draw in the package is keyed this way, so results never
    depend on the order in which draws happen.
    """
    key = ":".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(key.encode("utf-8")).digest()[:8], "big")


def format_period(period: date, frequency: str) -> str:
    if frequency == MONTHLY:
        return period.strftime("%Y-%m")
    return period.isoformat()


def parse_period(text: str, frequency: str) -> date:
    """Parse `YYYY-MM` (monthly) or `YYYY-MM-DD` (daily)."""
    text = text.strip()
    if frequency == MONTHLY:
        if not re.fullmatch(r"\d{4}-\d{2}", text):
            raise ValueError(f"expected YYYY-MM, got {text!r}")
        year, month = text.split("-")
        return date(int(year), int(month), 1)
    if not re.fullmatch(r"\d{4}-\d{2}-\d{2}", text):
        raise ValueError(f"expected YYYY-MM-DD, got {text!r}")
    return date.fromisoformat(text)


@lru_cache(maxsize=256)
def _contiguous_periods(start: date, end: date, frequency: str) -> Tuple[date, ...]:
    index = pd.date_range(start=start, end=end, freq=_PANDAS_FREQ[frequency])
    return tuple(ts.date() for ts in index)


@dataclass(frozen=True)
class TimeGrid:
    periods: Tuple[date, ...]
    frequency: str = MONTHLY

    def __post_init__(self):
        object.__setattr__(self, "periods", tuple(self.periods))
        if self.frequency not in FREQUENCIES:
            raise SeriesValidationError(f"unknown frequency {self.frequency!r}")
        if len(self.periods) < 2:
            raise SeriesValidationError("a time grid needs at least 2 periods")
        if self.frequency == MONTHLY:
            for i, period in enumerate(self.periods):
                if period.day != 1:
                    raise SeriesValidationError("monthly periods must be first-of-month dates", i)
        expected = _contiguous_periods(self.periods[0], self.periods[-1], self.frequency)
        if expected != self.periods:
            for i, (got, want) in enumerate(zip(self.periods, expected)):
                if got != want:
                    raise SeriesValidationError(
                        f"grid is not contiguous at {self.frequency} frequency", i
                    )
            raise SeriesValidationError(f"grid is not contiguous at {self.frequency} frequency")

    @classmethod
    def from_window(cls, start: date, end: date, frequency: str = MONTHLY) -> "TimeGrid":
        if frequency not in FREQUENCIES:
            raise SeriesValidationError(f"unknown frequency {frequency!r}")
        return cls(_contiguous_periods(start, end, frequency), frequency)

    @classmethod
    def monthly(cls, start: date, n_periods: int) -> "TimeGrid":
        index = pd.date_range(start=start, periods=n_periods, freq="MS")
        return cls(tuple(ts.date() for ts in index), MONTHLY)

    def __len__(self) -> int:
        return len(self.periods)

    @property
    def start(self) -> date:
        return self.periods[0]

    @property
    def end(self) -> date:
        return self.periods[-1]

    def index_of(self, period: date) -> int:
        try:
            return self.periods.index(period)
        except ValueError:
            raise SeriesValidationError(f"period {period} is not on the grid") from None

    def slice(self, start: date, end: date) -> "TimeGrid":
        return TimeGrid(self.periods[self.index_of(start): self.index_of(end) + 1], self.frequency)

    def labels(self) -> List[str]:
        return [format_period(p, self.frequency) for p in self.periods]


@dataclass(frozen=True)
class TermQuery:
    """One Trends query: a term, a region and an inclusive period window."""

    term: str
    geo: str
    start: date
    end: date
    frequency: str = MONTHLY

    def __post_init__(self):
        if not self.term or not self.term.strip():
            raise SeriesValidationError("query term must be nonempty")
        if self.frequency not in FREQUENCIES:
            raise SeriesValidationError(f"unknown frequency {self.frequency!r}")
        if self.start > self.end:
            raise SeriesValidationError(f"window start {self.start} is after window end {self.end}")
        if self.frequency == MONTHLY and (self.start.day != 1 or self.end.day != 1):
            raise SeriesValidationError("monthly windows must start and end on first-of-month dates")

    @property
    def window(self) -> Tuple[date, date]:
        return self.start, self.end

    def grid(self) -> TimeGrid:
        return TimeGrid.from_window(self.start, self.end, self.frequency)

    @property
    def slug(self) -> str:
        slug = re.sub(r"[^a-z0-9]+", "-", self.term.lower()).strip("-")
        return slug or "term"


def _frozen_array(values, dtype=float) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class SampleSeries:
    """One normalized 0-100 series, as downloaded or drawn."""

    query: TermQuery
    values: np.ndarray
    download_date: Optional[date]
    sample_id: str
    low_volume: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values))
        if self.low_volume is None:
            mask = np.zeros(self.values.shape, dtype=bool)
        else:
            mask = self.low_volume
        object.__setattr__(self, "low_volume", _frozen_array(mask, dtype=bool))

    @property
    def grid(self) -> TimeGrid:
        return self.query.grid()

    @property
    def term(self) -> str:
        return self.query.term

    def same_content(self, other: "SampleSeries") -> bool:
        return (
            self.query == other.query
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.low_volume, other.low_volume)
        )


@dataclass(frozen=True, eq=False)
class AveragedSeries:
    """Per-period arithmetic mean of one term over several samples."""

    query: TermQuery
    values: np.ndarray
    member_ids: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values))
        object.__setattr__(self, "member_ids", tuple(self.member_ids))
        if not self.member_ids:
            raise SeriesValidationError("an averaged series needs at least one member")
        if len(set(self.member_ids)) != len(self.member_ids):
            raise SeriesValidationError("averaged member ids must be distinct")
        bad = np.flatnonzero((self.values < 0) | (self.values > 100) | ~np.isfinite(self.values))
        if bad.size:
            raise SeriesValidationError("averaged value outside [0, 100]", int(bad[0]))

    @property
    def grid(self) -> TimeGrid:
        return self.query.grid()

    @property
    def term(self) -> str:
        return self.query.term

    @property
    def sample_id(self) -> str:
        return "avg(" + "+".join(self.member_ids) + ")"


@dataclass(frozen=True, eq=False)
class SamplePool:
    """S repeated samples of the same P queries (an S x P matrix of series)."""

    query_set: Tuple[TermQuery, ...]
    samples: Tuple[Tuple[SampleSeries, ...], ...]
    sample_ids: Tuple[str, ...] = field(init=False)

    def __post_init__(self):
        query_set = tuple(self.query_set)
        rows = tuple(tuple(row) for row in self.samples)
        object.__setattr__(self, "query_set", query_set)
        object.__setattr__(self, "samples", rows)

        if not query_set:
            raise PoolShapeError("a pool needs at least one query")
        if not rows:
            raise PoolShapeError("a pool needs at least one sample")
        geos = {q.geo for q in query_set}
        windows = {(q.start, q.end, q.frequency) for q in query_set}
        if len(geos) != 1 or len(windows) != 1:
            raise PoolShapeError("all pooled queries must share one geo and one grid")
        seen = set()
        for query in query_set:
            if query.term in seen:
                raise PoolShapeError(f"query {query.term!r} appears more than once in the pool")
            seen.add(query.term)

        ids = []
        for s, row in enumerate(rows):
            if len(row) != len(query_set):
                raise PoolShapeError(
                    f"sample row {s} has {len(row)} series, expected {len(query_set)}"
                )
            row_ids = {series.sample_id for series in row}
            if len(row_ids) != 1:
                raise PoolShapeError(f"sample row {s} mixes sample ids {sorted(row_ids)}")
            for query, series in zip(query_set, row):
                if series.query != query:
                    raise PoolShapeError(
                        f"sample row {s}: series for {series.query.term!r} does not match "
                        f"query {query.term!r}"
                    )
                if len(series.values) != len(query.grid()):
                    raise PoolShapeError(f"sample row {s}: series length does not match grid")
            ids.append(row[0].sample_id)
        if len(set(ids)) != len(ids):
            raise PoolShapeError("duplicate sample ids in pool")
        object.__setattr__(self, "sample_ids", tuple(ids))

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    @property
    def n_terms(self) -> int:
        return len(self.query_set)

    @property
    def geo(self) -> str:
        return self.query_set[0].geo

    @property
    def grid(self) -> TimeGrid:
        return self.query_set[0].grid()

    @property
    def terms(self) -> List[str]:
        return [q.term for q in self.query_set]

    def row(self, sample_id: str) -> Tuple[SampleSeries, ...]:
        try:
            return self.samples[self.sample_ids.index(sample_id)]
        except ValueError:
            raise PoolShapeError(f"unknown sample id {sample_id!r}") from None

    def term_matrix(self, term_index: int) -> np.ndarray:
        """S x T matrix of one term's values across samples."""
        return np.vstack([row[term_index].values for row in self.samples])

    def sample_matrix(self, sample_id: str) -> np.ndarray:
        """T x P covariate matrix of one sample."""
        return np.column_stack([series.values for series in self.row(sample_id)])

    def subset(self, sample_ids: Iterable[str]) -> "SamplePool":
        return SamplePool(self.query_set, [self.row(sid) for sid in sample_ids])
