"""
Error types raised across the trends-sampling package.

Every error is a ValueError so callers that only know about bad input
values can still catch them.
"""

from typing import Optional


class TrendsError(ValueError):
    """Base class for every domain error."""


class SeriesValidationError(TrendsError):
    def __init__(self, message: str, period_index: Optional[int] = None):
        self.period_index = period_index
        if period_index is not None:
            message = f"{message} (period index {period_index})"
        super().__init__(message)


class NormalizationError(TrendsError):
    pass


class TrendsCSVParseError(TrendsError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


class CatalogError(TrendsError):
    pass


class PoolShapeError(TrendsError):
    pass


class LassoError(TrendsError):
    pass


class SimulationError(TrendsError):
    pass


class NowcastError(TrendsError):
    pass


class VintageError(TrendsError):
    pass


class ConfigError(TrendsError):
    pass


class UsageError(TrendsError):
    """Bad command-line usage; the CLI exits with status 2."""


class SamplerError(TrendsError):
    pass
