"""
Synthetic ground truth for every experiment.

A LatentPanel holds true search counts per term and period plus the total
searches of each period. Trends-like samples are drawn from it by binomial
thinning (each search is kept with probability `sampling_fraction`) followed
by the 0-100 normalization. Google does not document its sampling scheme;
binomial thinning is a modeling assumption that reproduces the observed
behavior (rare terms vary much more between downloads than popular ones).

Random draws are keyed by hashed sub-seeds, never by a shared stream, so a
given (panel, config, sample index) always yields the same series no matter
how many samples are drawn, in what order, or on how many workers.
"""

import logging
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.stats import binom, poisson

from models.errors import SamplerError
from models.series import SamplePool, SampleSeries, TermQuery, TimeGrid, derive_seed
from preprocessing.normalization import normalize

logger = logging.getLogger(__name__)

DEFAULT_DOWNLOAD_START = date(2021, 2, 1)

# base-rate scale per synthetic geography; the second market searches less
GEO_POPULARITY = {"US": 0.7, "BR": 0.4}

ECONOMIC_TERMS = [
    "gdp growth", "inflation", "unemployment", "interest rate", "exchange rate",
    "stock market", "mortgage", "recession", "oil price", "refined petroleum",
    "consumer confidence", "retail sales", "industrial production", "housing starts",
    "trade balance", "job openings", "minimum wage", "tax refund", "credit card", "gold price",
]

_SEASONAL_PERIODS = [12, 6, 24, 4, 36, 9, 18, 60, 8, 30]


@dataclass(frozen=True)
class LatentTermSpec:
    name: str
    base_rate: float
    trend_slope: float = 0.0
    seasonal_amplitude: float = 0.0
    seasonal_period: int = 12
    shock_sd: float = 0.0

    def __post_init__(self):
        if not self.name:
            raise SamplerError("term spec needs a name")
        if not self.base_rate > 0:
            raise SamplerError(f"{self.name}: base_rate must be positive")
        if not 0 <= self.seasonal_amplitude < 1:
            raise SamplerError(f"{self.name}: seasonal_amplitude must be in [0, 1)")
        if self.seasonal_period < 1:
            raise SamplerError(f"{self.name}: seasonal_period must be >= 1")
        if self.shock_sd < 0:
            raise SamplerError(f"{self.name}: shock_sd must be >= 0")
        if self.trend_slope <= -1:
            raise SamplerError(f"{self.name}: trend_slope must be > -1")

    def expected_counts(self, n_periods: int) -> np.ndarray:
        """Mean search count per period before log shocks."""
        t = np.arange(n_periods, dtype=float)
        return (
            self.base_rate
            * (1.0 + self.trend_slope) ** t
            * (1.0 + self.seasonal_amplitude * np.sin(2.0 * math.pi * t / self.seasonal_period))
        )


@dataclass(frozen=True, eq=False)
class LatentPanel:
    grid: TimeGrid
    term_counts: np.ndarray      # P x T
    total_counts: np.ndarray     # T
    terms: Tuple[str, ...]
    geo: str = "US"

    def __post_init__(self):
        counts = np.asarray(self.term_counts, dtype=np.int64)
        totals = np.asarray(self.total_counts, dtype=np.int64)
        object.__setattr__(self, "term_counts", counts)
        object.__setattr__(self, "total_counts", totals)
        object.__setattr__(self, "terms", tuple(self.terms))
        if counts.ndim != 2 or counts.shape[0] == 0:
            raise SamplerError("panel has no terms")
        if counts.shape[1] != len(self.grid) or totals.shape != (len(self.grid),):
            raise SamplerError("panel counts do not match the grid length")
        if len(self.terms) != counts.shape[0]:
            raise SamplerError("one term name is needed per count row")
        if np.any(counts < 0) or np.any(totals <= 0):
            raise SamplerError("counts must be nonnegative and totals positive")
        if np.any(totals < counts.sum(axis=0)):
            raise SamplerError("totals must dominate the sum of term counts")

    @property
    def n_terms(self) -> int:
        return self.term_counts.shape[0]

    def query(self, term_index: int, start_index: int = 0, end_index: Optional[int] = None) -> TermQuery:
        end_index = len(self.grid) - 1 if end_index is None else end_index
        return TermQuery(
            term=self.terms[term_index],
            geo=self.geo,
            start=self.grid.periods[start_index],
            end=self.grid.periods[end_index],
            frequency=self.grid.frequency,
        )

    def window(self, start_index: int, end_index: int) -> "LatentPanel":
        """Sub-panel over grid positions start_index..end_index inclusive."""
        if start_index < 0 or end_index >= len(self.grid) or end_index - start_index < 1:
            raise SamplerError(
                f"window [{start_index}, {end_index}] does not fit the panel grid of {len(self.grid)} periods"
            )
        periods = self.grid.periods
        return LatentPanel(
            grid=self.grid.slice(periods[start_index], periods[end_index]),
            term_counts=self.term_counts[:, start_index: end_index + 1],
            total_counts=self.total_counts[start_index: end_index + 1],
            terms=self.terms,
            geo=self.geo,
        )

    def true_series(self, term_index: int) -> np.ndarray:
        """The normalized index an unsampled download would show."""
        return normalize(self.term_counts[term_index], self.total_counts)


@dataclass(frozen=True)
class SamplerConfig:
    sampling_fraction: float = 0.01
    seed: int = 0
    n_samples: int = 14
    download_start: date = field(default=DEFAULT_DOWNLOAD_START)

    def __post_init__(self):
        if not 0 < self.sampling_fraction <= 1:
            raise SamplerError("sampling_fraction must be in (0, 1]")
        if self.n_samples < 1:
            raise SamplerError("n_samples must be >= 1")
        if not -(2 ** 63) <= int(self.seed) < 2 ** 64:
            raise SamplerError("seed must fit in 64 bits")


def _uniforms(rng: np.random.Generator, n: int) -> np.ndarray:
    # ppf(0) is -1 for discrete distributions; keep draws strictly inside (0, 1)
    return np.maximum(rng.random(n), np.finfo(float).tiny)


def _poisson_counts(rng: np.random.Generator, means: np.ndarray) -> np.ndarray:
    return poisson.ppf(_uniforms(rng, len(means)), means).astype(np.int64)


def _thin(rng: np.random.Generator, counts: np.ndarray, fraction: float) -> np.ndarray:
    u = _uniforms(rng, len(counts))
    if fraction >= 1.0:
        return counts.copy()
    kept = np.zeros(len(counts), dtype=np.int64)
    positive = counts > 0
    if positive.any():
        kept[positive] = binom.ppf(u[positive], counts[positive], fraction).astype(np.int64)
    return kept


def gen_latent_panel(specs: Sequence[LatentTermSpec], grid: TimeGrid, background_rate: float,
                     seed: int, geo: str = "US") -> LatentPanel:
    """Draw true counts for each term plus background searches for the totals."""
    if not specs:
        raise SamplerError("at least one term spec is required")
    needed = sum(spec.base_rate for spec in specs)
    if background_rate < needed:
        raise SamplerError(
            f"background rate {background_rate:g} is below the sum of term base rates {needed:g}"
        )
    n_periods = len(grid)
    counts = np.zeros((len(specs), n_periods), dtype=np.int64)
    for j, spec in enumerate(specs):
        rng = np.random.default_rng(derive_seed(seed, "latent", j))
        shocks = rng.normal(0.0, spec.shock_sd, n_periods) if spec.shock_sd > 0 else np.zeros(n_periods)
        means = spec.expected_counts(n_periods) * np.exp(shocks)
        counts[j] = _poisson_counts(rng, means)

    rng = np.random.default_rng(derive_seed(seed, "background"))
    background = _poisson_counts(rng, np.full(n_periods, float(background_rate)))
    totals = background + counts.sum(axis=0)
    totals = np.maximum(totals, 1)
    logger.info(f"[Sampler] Generated latent panel: {len(specs)} terms x {n_periods} periods ({geo})")
    return LatentPanel(grid=grid, term_counts=counts, total_counts=totals,
                       terms=tuple(spec.name for spec in specs), geo=geo)


def draw_series(panel: LatentPanel, term_index: int, fraction: float, seed_parts: Tuple,
                sample_id: str, download_date: Optional[date]) -> SampleSeries:
    """Thin one term of `panel` with the sub-seed keyed by `seed_parts`, then normalize."""
    rng = np.random.default_rng(derive_seed(*seed_parts, term_index))
    term = panel.term_counts[term_index]
    others = panel.total_counts - term
    kept_term = _thin(rng, term, fraction)
    kept_total = kept_term + _thin(rng, others, fraction)
    # a period with no surviving searches carries no information: share 0
    kept_total = np.where(kept_total == 0, 1, kept_total)
    return SampleSeries(
        query=panel.query(term_index),
        values=normalize(kept_term, kept_total),
        download_date=download_date,
        sample_id=sample_id,
    )


def sample_label(sample_index: int) -> str:
    return f"s{sample_index:02d}"


def draw_sample(panel: LatentPanel, cfg: SamplerConfig, sample_index: int) -> List[SampleSeries]:
    """One download of every panel term (sample `sample_index` of the pool)."""
    if panel.n_terms == 0:
        raise SamplerError("panel is empty")
    if not 0 <= sample_index < cfg.n_samples:
        raise SamplerError(f"sample_index {sample_index} outside [0, {cfg.n_samples})")
    download_date = cfg.download_start + timedelta(days=sample_index)
    return [
        draw_series(panel, j, cfg.sampling_fraction, (cfg.seed, "sample", sample_index),
                    sample_label(sample_index), download_date)
        for j in range(panel.n_terms)
    ]


def draw_pool(panel: LatentPanel, cfg: SamplerConfig, n_jobs: int = 1) -> SamplePool:
    rows = Parallel(n_jobs=n_jobs)(
        delayed(draw_sample)(panel, cfg, s) for s in range(cfg.n_samples)
    )
    query_set = [panel.query(j) for j in range(panel.n_terms)]
    logger.info(f"[Sampler] Drew pool of {cfg.n_samples} samples for {panel.geo}")
    return SamplePool(query_set, rows)


def default_term_specs(n_terms: int = 20, popularity: float = 1.0, seed: int = 0) -> List[LatentTermSpec]:
    """
    An economics-flavored panel: base rates spread log-uniformly over
    a 25x range, mixed seasonal periods, small drifts and log shocks.
    `popularity` scales every base rate (a smaller market searches less).
    """
    if n_terms < 1:
        raise SamplerError("n_terms must be >= 1")
    if popularity <= 0:
        raise SamplerError("popularity must be positive")
    rng = np.random.default_rng(derive_seed(seed, "specs"))
    base_rates = np.geomspace(2_000, 50_000, n_terms) if n_terms > 1 else np.array([10_000.0])
    order = rng.permutation(n_terms)
    specs = []
    for j in range(n_terms):
        name = ECONOMIC_TERMS[j] if j < len(ECONOMIC_TERMS) else f"term {j + 1:02d}"
        specs.append(LatentTermSpec(
            name=name,
            base_rate=float(popularity * base_rates[order[j]]),
            trend_slope=float(rng.uniform(-0.002, 0.006)),
            seasonal_amplitude=float(rng.uniform(0.2, 0.5)),
            seasonal_period=_SEASONAL_PERIODS[j % len(_SEASONAL_PERIODS)],
            shock_sd=0.15,
        ))
    return specs


def export_latent_panel(panel: LatentPanel) -> pd.DataFrame:
    df = pd.DataFrame(panel.term_counts.T, columns=list(panel.terms))
    df.insert(0, "period", panel.grid.labels())
    df["total"] = panel.total_counts
    return df
