"""Small builders shared by the test modules."""

from datetime import date

import numpy as np

from models.series import SamplePool, SampleSeries, TermQuery, TimeGrid
from services.sampler_service import (
    LatentTermSpec,
    SamplerConfig,
    default_term_specs,
    draw_pool,
    gen_latent_panel,
)

START = date(2010, 1, 1)


def make_series(values, term="gdp growth", geo="US", start=START, sample_id="s00", low_volume=None,
                download_date=None):
    grid = TimeGrid.monthly(start, len(values))
    query = TermQuery(term=term, geo=geo, start=grid.start, end=grid.end)
    return SampleSeries(query=query, values=np.asarray(values, dtype=float), download_date=download_date,
                        sample_id=sample_id, low_volume=low_volume)


def make_pool(samples, terms=None, geo="US", start=START):
    """`samples[s][j]` is the value list of term j in sample s."""
    n_terms = len(samples[0])
    terms = terms or [f"term {j}" for j in range(n_terms)]
    rows = []
    for s, row in enumerate(samples):
        rows.append([make_series(values, term=terms[j], geo=geo, start=start, sample_id=f"s{s:02d}")
                     for j, values in enumerate(row)])
    return SamplePool([series.query for series in rows[0]], rows)


def small_panel(n_terms=5, n_periods=36, popularity=1.0, seed=0, geo="US"):
    grid = TimeGrid.monthly(START, n_periods)
    return gen_latent_panel(default_term_specs(n_terms, popularity, seed), grid, 1e7, seed, geo)


def small_pool(n_samples=4, n_terms=5, n_periods=36, popularity=1.0, seed=0, fraction=0.01, geo="US"):
    panel = small_panel(n_terms, n_periods, popularity, seed, geo)
    return draw_pool(panel, SamplerConfig(sampling_fraction=fraction, seed=seed, n_samples=n_samples))


def single_term_panel(base_rate, n_periods=120, seed=0, amplitude=0.5, slope=0.0, shock_sd=0.0, name="term"):
    spec = LatentTermSpec(name=name, base_rate=base_rate, trend_slope=slope, seasonal_amplitude=amplitude,
                          seasonal_period=12, shock_sd=shock_sd)
    return gen_latent_panel([spec], TimeGrid.monthly(START, n_periods), 1e7, seed)
