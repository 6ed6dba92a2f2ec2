"""
LASSO by cyclic coordinate descent.

Covariates are standardized to zero mean and unit (population) variance and
the target is centered, so the penalty treats every column alike and the
intercept is never penalized. On the standardized scale the problem is

    minimize (1/2T) * ||yc - Z b||^2 + lambda * ||b||_1

Coefficients are mapped back to the original scale on return.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np
from sklearn.model_selection import KFold

from models.errors import LassoError

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-7
DEFAULT_MAX_ITER = 10_000
DEFAULT_N_LAMBDAS = 50
DEFAULT_LAMBDA_MIN_RATIO = 1e-3

BIC = "bic"
CV = "cv"


def soft_threshold(z, gamma):
    """sign(z) * max(|z| - gamma, 0)."""
    if np.any(np.asarray(gamma) < 0):
        raise LassoError("soft-threshold gamma must be >= 0")
    return np.sign(z) * np.maximum(np.abs(z) - gamma, 0.0)


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    X: np.ndarray
    y: np.ndarray
    column_means: np.ndarray
    column_sds: np.ndarray
    y_mean: float
    included: np.ndarray

    @classmethod
    def from_arrays(cls, X, y) -> "DesignMatrix":
        X = np.array(X, dtype=float, copy=True)
        y = np.array(y, dtype=float, copy=True)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or y.ndim != 1:
            raise LassoError("X must be T x P and y a length-T vector")
        n_obs, n_cols = X.shape
        if n_obs < 2 or n_cols < 1:
            raise LassoError(f"design needs T >= 2 and P >= 1, got T={n_obs}, P={n_cols}")
        if len(y) != n_obs:
            raise LassoError(f"X has {n_obs} rows but y has {len(y)} values")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
            raise LassoError("design contains non-finite values")

        means = X.mean(axis=0)
        # constant columns carry no information and stay at coefficient 0
        included = np.ptp(X, axis=0) > 0
        sds = np.where(included, X.std(axis=0), 1.0)
        for array in (X, y, means, sds, included):
            array.setflags(write=False)
        return cls(X=X, y=y, column_means=means, column_sds=sds, y_mean=float(y.mean()), included=included)

    @property
    def n_obs(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @cached_property
    def Z(self) -> np.ndarray:
        Z = (self.X - self.column_means) / self.column_sds
        Z[:, ~self.included] = 0.0
        return Z

    @cached_property
    def y_centered(self) -> np.ndarray:
        return self.y - self.y_mean

    @cached_property
    def gram(self) -> np.ndarray:
        return self.Z.T @ self.Z / self.n_obs

    @cached_property
    def covariance(self) -> np.ndarray:
        return self.Z.T @ self.y_centered / self.n_obs

    def to_standardized(self, coefficients) -> np.ndarray:
        return np.asarray(coefficients, dtype=float) * self.column_sds * self.included

    def to_original(self, std_coefficients) -> Tuple[np.ndarray, float]:
        beta = np.where(self.included, std_coefficients / self.column_sds, 0.0)
        intercept = self.y_mean - float(beta @ self.column_means)
        return beta, intercept


@dataclass(frozen=True, eq=False)
class LassoFit:
    lam: float
    coefficients: np.ndarray
    intercept: float
    active_set: Tuple[int, ...]
    n_iterations: int
    converged: bool

    @property
    def n_active(self) -> int:
        return len(self.active_set)


@dataclass(frozen=True)
class SelectionRule:
    kind: str = BIC
    k: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (BIC, CV):
            raise LassoError(f"unknown selection rule {self.kind!r}, expected 'bic' or 'cv'")
        if self.kind == CV and self.k < 2:
            raise LassoError("cv needs at least 2 folds")

    @classmethod
    def parse(cls, text: str) -> "SelectionRule":
        """Accepts `bic`, `cv`, `cv:<k>` or `cv:<k>:<seed>`."""
        parts = str(text).strip().lower().split(":")
        if parts[0] == BIC and len(parts) == 1:
            return cls(BIC)
        if parts[0] == CV and len(parts) <= 3:
            try:
                k = int(parts[1]) if len(parts) > 1 else 5
                seed = int(parts[2]) if len(parts) > 2 else 0
            except ValueError:
                raise LassoError(f"malformed selection rule {text!r}") from None
            return cls(CV, k=k, seed=seed)
        raise LassoError(f"malformed selection rule {text!r}")

    def __str__(self) -> str:
        return BIC if self.kind == BIC else f"{CV}:{self.k}:{self.seed}"


def lambda_max(design: DesignMatrix) -> float:
    """Smallest penalty at which every coefficient is zero."""
    if not design.included.any():
        return 0.0
    return float(np.max(np.abs(design.covariance[design.included])))


def lambda_grid(lam_max: float, n_lambdas: int = DEFAULT_N_LAMBDAS,
                lambda_min_ratio: float = DEFAULT_LAMBDA_MIN_RATIO) -> np.ndarray:
    if n_lambdas < 2:
        raise LassoError("a path needs at least 2 lambdas")
    if not 0 < lambda_min_ratio < 1:
        raise LassoError("lambda_min_ratio must be in (0, 1)")
    if lam_max <= 0:
        return np.array([0.0])
    return np.geomspace(lam_max, lam_max * lambda_min_ratio, n_lambdas)


def _sweep(b: np.ndarray, g: np.ndarray, gram: np.ndarray, coords, lam: float) -> float:
    max_delta = 0.0
    for j in coords:
        old = b[j]
        new = g[j] + old
        new = np.sign(new) * max(abs(new) - lam, 0.0)
        if new != old:
            delta = new - old
            g -= gram[:, j] * delta
            b[j] = new
            max_delta = max(max_delta, abs(delta))
    return max_delta


def fit(design: DesignMatrix, lam: float, tolerance: float = DEFAULT_TOLERANCE,
        max_iter: int = DEFAULT_MAX_ITER, warm_start: Optional[np.ndarray] = None) -> LassoFit:
    """
    Coordinate descent at one penalty. Sweeps over the active set until it
    settles, then confirms with a sweep over every column; converged means
    a full sweep moved no coefficient by `tolerance` or more.
    """
    if lam < 0:
        raise LassoError("lambda must be >= 0")
    if tolerance <= 0:
        raise LassoError("tolerance must be > 0")
    if max_iter < 1:
        raise LassoError("max_iter must be >= 1")

    gram, cov = design.gram, design.covariance
    if warm_start is None:
        b = np.zeros(design.n_features)
    else:
        if len(warm_start) != design.n_features:
            raise LassoError("warm start has the wrong length")
        b = design.to_standardized(warm_start)
    g = cov - gram @ b
    all_coords = np.flatnonzero(design.included)

    n_iter = 0
    converged = False
    while n_iter < max_iter:
        delta = _sweep(b, g, gram, all_coords, lam)
        n_iter += 1
        if delta < tolerance:
            converged = True
            break
        active = np.flatnonzero(b)
        while n_iter < max_iter:
            delta = _sweep(b, g, gram, active, lam)
            n_iter += 1
            if delta < tolerance:
                break

    if not converged:
        logger.debug(f"[Lasso] No convergence at lambda={lam:.4g} after {n_iter} sweeps")
    beta, intercept = design.to_original(b)
    return LassoFit(lam=float(lam), coefficients=beta, intercept=intercept,
                    active_set=tuple(int(j) for j in np.flatnonzero(beta)),
                    n_iterations=n_iter, converged=converged)


def fit_path(design: DesignMatrix, n_lambdas: int = DEFAULT_N_LAMBDAS,
             lambda_min_ratio: float = DEFAULT_LAMBDA_MIN_RATIO,
             tolerance: float = DEFAULT_TOLERANCE, max_iter: int = DEFAULT_MAX_ITER,
             lambdas: Optional[Sequence[float]] = None) -> List[LassoFit]:
    """Fits along a decreasing penalty grid, each warm-started from the previous one."""
    if lambdas is None:
        lambdas = lambda_grid(lambda_max(design), n_lambdas, lambda_min_ratio)
    path = []
    previous = None
    for lam in lambdas:
        current = fit(design, lam, tolerance=tolerance, max_iter=max_iter,
                      warm_start=None if previous is None else previous.coefficients)
        path.append(current)
        previous = current
    return path


def predict(lasso_fit: LassoFit, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] != len(lasso_fit.coefficients):
        raise LassoError(f"X has {X.shape[1]} columns, fit has {len(lasso_fit.coefficients)}")
    return lasso_fit.intercept + X @ lasso_fit.coefficients


def objective(design: DesignMatrix, coefficients, lam: float) -> float:
    """Penalized loss on the standardized scale for original-scale coefficients."""
    b = design.to_standardized(coefficients)
    residual = design.y_centered - design.Z @ b
    return float(residual @ residual / (2 * design.n_obs) + lam * np.abs(b).sum())


def kkt_residual(design: DesignMatrix, lasso_fit: LassoFit) -> float:
    """Largest violation of the optimality conditions over the included columns."""
    b = design.to_standardized(lasso_fit.coefficients)
    gradient = design.Z.T @ (design.y_centered - design.Z @ b) / design.n_obs
    lam = lasso_fit.lam
    violations = np.where(
        b != 0,
        np.abs(gradient - lam * np.sign(b)),
        np.maximum(np.abs(gradient) - lam, 0.0),
    )
    violations = violations[design.included]
    return float(violations.max()) if violations.size else 0.0


def bic_score(design: DesignMatrix, lasso_fit: LassoFit) -> float:
    residual = design.y - predict(lasso_fit, design.X)
    rss = max(float(residual @ residual), np.finfo(float).tiny)
    n_obs = design.n_obs
    return n_obs * np.log(rss / n_obs) + lasso_fit.n_active * np.log(n_obs)


def cv_scores(design: DesignMatrix, lambdas: Sequence[float], k: int,
              tolerance: float = DEFAULT_TOLERANCE, max_iter: int = DEFAULT_MAX_ITER) -> np.ndarray:
    """Mean validation MSE per lambda over k contiguous, ordered folds."""
    if k > design.n_obs // 2:
        raise LassoError(f"{k} folds leave too few rows out of {design.n_obs}")
    folds = KFold(n_splits=k, shuffle=False).split(design.X)
    scores = np.zeros(len(lambdas))
    for train, test in folds:
        fold_design = DesignMatrix.from_arrays(design.X[train], design.y[train])
        fold_path = fit_path(fold_design, tolerance=tolerance, max_iter=max_iter, lambdas=lambdas)
        for i, fold_fit in enumerate(fold_path):
            error = design.y[test] - predict(fold_fit, design.X[test])
            scores[i] += float(error @ error) / len(test)
    return scores / k


def select_lambda(path: Sequence[LassoFit], design: DesignMatrix, rule: SelectionRule = SelectionRule()) -> LassoFit:
    """Best fit on the path under `rule`; ties go to the larger penalty."""
    if not path:
        raise LassoError("cannot select from an empty path")
    ordered = sorted(path, key=lambda f: -f.lam)
    if len(ordered) == 1:
        return ordered[0]
    if rule.kind == BIC:
        scores = [bic_score(design, f) for f in ordered]
    else:
        scores = cv_scores(design, [f.lam for f in ordered], rule.k)
    best = 0
    for i in range(1, len(ordered)):
        if scores[i] < scores[best]:
            best = i
    return ordered[best]


def fit_selected(X, y, rule: SelectionRule = SelectionRule(), n_lambdas: int = DEFAULT_N_LAMBDAS,
                 lambda_min_ratio: float = DEFAULT_LAMBDA_MIN_RATIO) -> LassoFit:
    """Standardize, fit the path and pick one fit."""
    design = DesignMatrix.from_arrays(X, y)
    path = fit_path(design, n_lambdas=n_lambdas, lambda_min_ratio=lambda_min_ratio)
    return select_lambda(path, design, rule)
