from .errors import (
    CatalogError,
    ConfigError,
    LassoError,
    NormalizationError,
    NowcastError,
    PoolShapeError,
    SamplerError,
    SeriesValidationError,
    SimulationError,
    TrendsCSVParseError,
    TrendsError,
    UsageError,
    VintageError,
)
from .lasso import DesignMatrix, LassoFit, SelectionRule, fit, fit_path, lambda_max, select_lambda, soft_threshold
from .series import AveragedSeries, SamplePool, SampleSeries, TermQuery, TimeGrid, derive_seed

__all__ = [
    "AveragedSeries",
    "CatalogError",
    "ConfigError",
    "DesignMatrix",
    "LassoError",
    "LassoFit",
    "NormalizationError",
    "NowcastError",
    "PoolShapeError",
    "SamplePool",
    "SampleSeries",
    "SamplerError",
    "SelectionRule",
    "SeriesValidationError",
    "SimulationError",
    "TermQuery",
    "TimeGrid",
    "TrendsCSVParseError",
    "TrendsError",
    "UsageError",
    "VintageError",
    "derive_seed",
    "fit",
    "fit_path",
    "lambda_max",
    "select_lambda",
    "soft_threshold",
]
