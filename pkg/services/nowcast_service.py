"""
Nowcasting a delayed target from same-period Trends covariates.

One LASSO model is fitted per sample and one on the average of all samples,
each on the training window only, and scored by RMSE over the evaluation
window.
"""

import logging
from dataclasses import dataclass
from datetime import date
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from models.errors import NowcastError, SeriesValidationError
from models.lasso import (
    CV,
    DEFAULT_LAMBDA_MIN_RATIO,
    DEFAULT_N_LAMBDAS,
    LassoFit,
    SelectionRule,
    fit_selected,
    predict,
)
from models.series import DAILY, SamplePool, TimeGrid, derive_seed, format_period
from preprocessing.smoothing import trend_smooth
from services.aggregate_service import average_pool
from services.simulation_service import build_dgp

logger = logging.getLogger(__name__)

PROPOSED = "proposed"
DEFAULT_DAILY_WINDOW = 7
DEFAULT_MONTHLY_WINDOW = 3
DEFAULT_RULE = SelectionRule(CV)


def default_smooth_window(frequency: str) -> int:
    return DEFAULT_DAILY_WINDOW if frequency == DAILY else DEFAULT_MONTHLY_WINDOW


@dataclass(frozen=True, eq=False)
class TargetSeries:
    name: str
    grid: TimeGrid
    values: np.ndarray
    trend_values: np.ndarray
    smooth_window: int

    def __post_init__(self):
        if len(self.values) != len(self.grid) or len(self.trend_values) != len(self.grid):
            raise NowcastError("target values, trend and grid must have equal lengths")

    @classmethod
    def from_values(cls, name: str, grid: TimeGrid, values, smooth_window: Optional[int] = None) -> "TargetSeries":
        values = np.asarray(values, dtype=float)
        if smooth_window is None:
            smooth_window = default_smooth_window(grid.frequency)
        return cls(name=name, grid=grid, values=values,
                   trend_values=trend_smooth(values, smooth_window), smooth_window=smooth_window)


@dataclass(frozen=True)
class PeriodRange:
    start: date
    end: date

    def __post_init__(self):
        if self.start > self.end:
            raise NowcastError(f"period range starts after it ends ({self.start} > {self.end})")

    def positions(self, grid: TimeGrid, what: str):
        try:
            return grid.index_of(self.start), grid.index_of(self.end)
        except SeriesValidationError:
            raise NowcastError(f"{what} does not cover {self.start}..{self.end}") from None


@dataclass(frozen=True, eq=False)
class NowcastFit:
    label: str
    model: LassoFit
    periods: List[date]
    predicted: np.ndarray
    actual: np.ndarray
    rmse: float


@dataclass
class NowcastReport:
    target_name: str
    fits: Dict[str, NowcastFit]

    @property
    def single_rmses(self) -> Dict[str, float]:
        return {label: f.rmse for label, f in self.fits.items() if label != PROPOSED}

    @property
    def proposed(self) -> float:
        return self.fits[PROPOSED].rmse

    @property
    def worst(self) -> float:
        return max(self.single_rmses.values())

    @property
    def best(self) -> float:
        return min(self.single_rmses.values())

    @property
    def average(self) -> float:
        values = list(self.single_rmses.values())
        return float(np.clip(sum(values) / len(values), self.best, self.worst))

    def to_frame(self) -> pd.DataFrame:
        """Summary row: Proposed, Worst, Best, Average."""
        return pd.DataFrame(
            [[self.proposed, self.worst, self.best, self.average]],
            index=pd.Index([self.target_name], name="target"),
            columns=["Proposed", "Worst", "Best", "Average"],
        )

    def models_frame(self) -> pd.DataFrame:
        rows = [{"target": self.target_name, "model": label, "rmse": f.rmse, "n_active": f.model.n_active,
                 "lambda": f.model.lam} for label, f in self.fits.items()]
        return pd.DataFrame(rows)

    def predictions_frame(self, frequency: str) -> pd.DataFrame:
        frames = []
        for label, f in self.fits.items():
            frames.append(pd.DataFrame({
                "target": self.target_name,
                "period": [format_period(p, frequency) for p in f.periods],
                "actual": f.actual,
                "predicted": f.predicted,
                "model": label,
            }))
        return pd.concat(frames, ignore_index=True)


def summary_frame(reports: Sequence[NowcastReport]) -> pd.DataFrame:
    """One Proposed/Worst/Best/Average row per target, in the order given."""
    if not reports:
        raise NowcastError("no nowcast reports to summarize")
    names = [report.target_name for report in reports]
    duplicates = sorted({name for name in names if names.count(name) > 1})
    if duplicates:
        raise NowcastError(f"duplicate target names: {', '.join(duplicates)}")
    return pd.concat([report.to_frame() for report in reports])


def rmse(predicted, actual) -> float:
    predicted = np.asarray(predicted, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if predicted.shape != actual.shape or predicted.ndim != 1:
        raise NowcastError("predicted and actual must be vectors of equal length")
    if len(actual) == 0:
        raise NowcastError("rmse needs at least one value")
    return float(np.sqrt(np.mean((predicted - actual) ** 2)))


def _check_windows(train: PeriodRange, evaluation: PeriodRange):
    if train.end >= evaluation.start:
        raise NowcastError(
            f"training window {train.start}..{train.end} must end before the evaluation window starts ({evaluation.start})"
        )


def fit_nowcast(target: TargetSeries, covariates: Sequence, train_window: PeriodRange, eval_window: PeriodRange,
                selection_rule: SelectionRule = DEFAULT_RULE, use_trend: bool = True, label: str = "model",
                n_lambdas: int = DEFAULT_N_LAMBDAS,
                lambda_min_ratio: float = DEFAULT_LAMBDA_MIN_RATIO) -> NowcastFit:
    """
    Fit on the training window, predict the evaluation window.

    Only training-window target values reach the fit: its trend is smoothed
    from the training slice alone.
    """
    _check_windows(train_window, eval_window)
    if not covariates:
        raise NowcastError("at least one covariate is required")
    t0, t1 = train_window.positions(target.grid, "target")
    e0, e1 = eval_window.positions(target.grid, "target")

    train_columns, eval_columns = [], []
    for series in covariates:
        grid = series.grid
        if grid.frequency != target.grid.frequency:
            raise NowcastError(f"covariate {series.term!r} is {grid.frequency}, target is {target.grid.frequency}")
        c0, c1 = train_window.positions(grid, f"covariate {series.term!r}")
        d0, d1 = eval_window.positions(grid, f"covariate {series.term!r}")
        train_columns.append(np.asarray(series.values[c0: c1 + 1], dtype=float))
        eval_columns.append(np.asarray(series.values[d0: d1 + 1], dtype=float))

    y_train = np.asarray(target.values[t0: t1 + 1], dtype=float)
    if use_trend:
        y_train = trend_smooth(y_train, target.smooth_window)
    model = fit_selected(np.column_stack(train_columns), y_train, selection_rule, n_lambdas, lambda_min_ratio)

    predicted = predict(model, np.column_stack(eval_columns))
    actual = (target.trend_values if use_trend else target.values)[e0: e1 + 1]
    periods = list(target.grid.periods[e0: e1 + 1])
    return NowcastFit(label=label, model=model, periods=periods, predicted=predicted,
                      actual=np.asarray(actual, dtype=float), rmse=rmse(predicted, actual))


def compare_samples(target: TargetSeries, pool: SamplePool, train_window: PeriodRange, eval_window: PeriodRange,
                    selection_rule: SelectionRule = DEFAULT_RULE, use_trend: bool = True, n_jobs: int = 1,
                    n_lambdas: int = DEFAULT_N_LAMBDAS,
                    lambda_min_ratio: float = DEFAULT_LAMBDA_MIN_RATIO) -> NowcastReport:
    """One model per sample plus the proposed model on the all-sample average."""
    _check_windows(train_window, eval_window)
    averaged = average_pool(pool, pool.sample_ids)
    jobs = [(sid, list(pool.row(sid))) for sid in pool.sample_ids] + [(PROPOSED, averaged)]
    fits = Parallel(n_jobs=n_jobs)(
        delayed(fit_nowcast)(target, covariates, train_window, eval_window, selection_rule, use_trend,
                             label, n_lambdas, lambda_min_ratio)
        for label, covariates in jobs
    )
    report = NowcastReport(target_name=target.name, fits={f.label: f for f in fits})
    logger.info(f"[Nowcast] {target.name}: proposed={report.proposed:.4g} worst={report.worst:.4g} "
                f"best={report.best:.4g} average={report.average:.4g}")
    return report


def build_synthetic_target(panel, support: Sequence[int], beta, noise_scale: float, seed: int,
                           smooth_window: Optional[int] = None, name: str = "target") -> TargetSeries:
    """A target driven by the true (unsampled) index of the `support` terms plus noise."""
    if not support:
        raise NowcastError("support must name at least one term")
    X_true = np.column_stack([panel.true_series(j) for j in support])
    values = build_dgp(X_true, beta, derive_seed(seed, "target"), noise_scale)
    return TargetSeries.from_values(name, panel.grid, values, smooth_window)


def default_windows(grid: TimeGrid, eval_fraction: float = 0.25) -> tuple:
    """Train on the leading part of the grid and evaluate on the rest."""
    if not 0 < eval_fraction < 1:
        raise NowcastError("eval_fraction must be in (0, 1)")
    n_eval = max(1, int(round(len(grid) * eval_fraction)))
    split = len(grid) - n_eval
    if split < 2:
        raise NowcastError("grid too short to split into training and evaluation windows")
    return (PeriodRange(grid.periods[0], grid.periods[split - 1]),
            PeriodRange(grid.periods[split], grid.periods[-1]))
