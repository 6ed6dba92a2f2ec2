"""
Monte-Carlo variable-selection experiment.

Setup 1 builds a target from five series of one sample and asks LASSO to
find those five terms in each of the other samples. Setup 2 builds the target
from the average of half the samples and runs a single LASSO on the average
of the other half. Accuracy is the share of the true terms recovered
(recall); false positives are reported alongside.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from models.errors import PoolShapeError, SimulationError
from models.lasso import DEFAULT_LAMBDA_MIN_RATIO, DEFAULT_N_LAMBDAS, SelectionRule, fit_selected
from models.series import SamplePool, derive_seed

logger = logging.getLogger(__name__)

DGP_KINDS = (1, 2, 3)
SUPPORT_SIZE = 5
DEFAULT_REPLICATIONS = 1000
DESK_REPLICATIONS = 200
SETUPS = (1, 2)


@dataclass(frozen=True, eq=False)
class DgpSpec:
    k: int
    true_support: Tuple[int, ...]
    beta: np.ndarray
    noise_seed: int

    def __post_init__(self):
        if self.k not in DGP_KINDS:
            raise SimulationError(f"unknown DGP index {self.k}")
        if len(set(self.true_support)) != len(self.true_support):
            raise SimulationError("true support indices must be distinct")
        if len(self.beta) != len(self.true_support):
            raise SimulationError("beta must have one coefficient per support index")


@dataclass(frozen=True)
class ReplicationResult:
    replication: int
    k: int
    geo: str
    setup: int
    selected_sets: Tuple[FrozenSet[int], ...]
    true_support: FrozenSet[int]

    @property
    def recall(self) -> float:
        return float(np.mean([selection_accuracy(s, self.true_support) for s in self.selected_sets]))

    @property
    def false_positive_count(self) -> float:
        return float(np.mean([false_positives(s, self.true_support) for s in self.selected_sets]))


@dataclass
class SetupReport:
    setup: int
    n_replications: int
    accuracy: Dict[Tuple[str, int], float]
    false_positives: Dict[Tuple[str, int], float]
    results: List[ReplicationResult] = field(default_factory=list)

    def cells(self) -> List[Tuple[str, int]]:
        return sorted(self.accuracy, key=lambda cell: (cell[0], cell[1]))

    def to_frame(self) -> pd.DataFrame:
        """One summary row: mean recall per (geo, k) cell, columns like `US1`."""
        row = {f"{geo}{k}": self.accuracy[(geo, k)] for geo, k in self.cells()}
        return pd.DataFrame([row], index=pd.Index([f"setup{self.setup}"], name="setup"))

    def replications_frame(self) -> pd.DataFrame:
        """One row per replication with recall and false-positive columns per cell."""
        rows: Dict[int, Dict[str, float]] = {}
        for result in self.results:
            row = rows.setdefault(result.replication, {"replication": result.replication})
            row[f"{result.geo}{result.k}_recall"] = result.recall
            row[f"{result.geo}{result.k}_fp"] = result.false_positive_count
        frame = pd.DataFrame([rows[r] for r in sorted(rows)])
        columns = ["replication"]
        for geo, k in self.cells():
            columns += [f"{geo}{k}_recall", f"{geo}{k}_fp"]
        return frame[columns]


def selection_accuracy(selected, true_support) -> float:
    true_support = set(true_support)
    if not true_support:
        raise SimulationError("true support is empty")
    return 100.0 * len(set(selected) & true_support) / len(true_support)


def false_positives(selected, true_support) -> int:
    return len(set(selected) - set(true_support))


def draw_beta(k: int, seed: int, size: int = SUPPORT_SIZE) -> np.ndarray:
    """
    k=1: integers uniform on [-10, 10], zeros redrawn so every true term matters.
    k=2: 1 or 2 with equal probability.
    k=3: uniform on [0, 1].
    """
    rng = np.random.default_rng(derive_seed(seed, "beta"))
    if k == 1:
        beta = rng.integers(-10, 11, size=size)
        while np.any(beta == 0):
            zeros = beta == 0
            beta[zeros] = rng.integers(-10, 11, size=int(zeros.sum()))
        return beta.astype(float)
    if k == 2:
        return rng.choice([1.0, 2.0], size=size)
    if k == 3:
        return rng.uniform(0.0, 1.0, size=size)
    raise SimulationError(f"unknown DGP index {k}, expected one of {DGP_KINDS}")


def build_dgp(X_source, beta, noise_seed: int, noise_scale: float = 1.0) -> np.ndarray:
    """Target = X * beta + Gaussian noise with sd = noise_scale * sd(signal)."""
    X_source = np.asarray(X_source, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if X_source.ndim != 2 or X_source.shape[1] != len(beta):
        raise SimulationError("covariate block and beta do not line up")
    if noise_scale < 0:
        raise SimulationError("noise_scale must be >= 0")
    signal = X_source @ beta
    variance = float(np.var(signal, ddof=1))
    if not variance > 0:
        raise SimulationError("signal has zero variance; the covariates are degenerate")
    rng = np.random.default_rng(derive_seed(noise_seed, "noise"))
    noise = rng.normal(0.0, noise_scale * np.sqrt(variance), size=len(signal))
    return signal + noise


def split_generator_estimator(n_samples: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Two disjoint halves of a random permutation of the sample indices."""
    order = rng.permutation(n_samples)
    half = n_samples // 2
    return np.sort(order[:half]), np.sort(order[half: 2 * half])


def _check_pool(pool: SamplePool, support_size: int, min_samples: int):
    if pool.n_samples < min_samples:
        raise PoolShapeError(f"pool needs at least {min_samples} samples, has {pool.n_samples}")
    if pool.n_terms < support_size:
        raise PoolShapeError(f"pool has {pool.n_terms} terms, fewer than the support size {support_size}")


def _selected(X, y, rule, n_lambdas, lambda_min_ratio) -> FrozenSet[int]:
    return frozenset(fit_selected(X, y, rule, n_lambdas, lambda_min_ratio).active_set)


def _replicate_setup1(matrices, geo, rep, seed, rule, noise_scale, support_size,
                      n_lambdas, lambda_min_ratio) -> List[ReplicationResult]:
    n_samples, n_terms = len(matrices), matrices[0].shape[1]
    rng = np.random.default_rng(derive_seed(seed, rep, geo, "design"))
    s = int(rng.integers(n_samples))
    support = np.sort(rng.choice(n_terms, size=support_size, replace=False))
    results = []
    for k in DGP_KINDS:
        cell_seed = derive_seed(seed, rep, geo, k)
        dgp = DgpSpec(k=k, true_support=tuple(int(j) for j in support),
                      beta=draw_beta(k, cell_seed, support_size), noise_seed=cell_seed)
        target = build_dgp(matrices[s][:, support], dgp.beta, dgp.noise_seed, noise_scale)
        selected = tuple(
            _selected(matrices[m], target, rule, n_lambdas, lambda_min_ratio)
            for m in range(n_samples) if m != s
        )
        results.append(ReplicationResult(replication=rep, k=k, geo=geo, setup=1,
                                         selected_sets=selected, true_support=frozenset(dgp.true_support)))
    return results


def _replicate_setup2(matrices, geo, rep, seed, rule, noise_scale, support_size,
                      n_lambdas, lambda_min_ratio) -> List[ReplicationResult]:
    n_samples, n_terms = len(matrices), matrices[0].shape[1]
    rng = np.random.default_rng(derive_seed(seed, rep, geo, "design"))
    generator, estimator = split_generator_estimator(n_samples, rng)
    support = np.sort(rng.choice(n_terms, size=support_size, replace=False))
    X_generator = np.mean([matrices[i] for i in generator], axis=0)
    X_estimator = np.mean([matrices[i] for i in estimator], axis=0)
    results = []
    for k in DGP_KINDS:
        cell_seed = derive_seed(seed, rep, geo, k)
        dgp = DgpSpec(k=k, true_support=tuple(int(j) for j in support),
                      beta=draw_beta(k, cell_seed, support_size), noise_seed=cell_seed)
        target = build_dgp(X_generator[:, support], dgp.beta, dgp.noise_seed, noise_scale)
        selected = (_selected(X_estimator, target, rule, n_lambdas, lambda_min_ratio),)
        results.append(ReplicationResult(replication=rep, k=k, geo=geo, setup=2,
                                         selected_sets=selected, true_support=frozenset(dgp.true_support)))
    return results


_REPLICATORS = {1: _replicate_setup1, 2: _replicate_setup2}


def _summarize(setup: int, n_replications: int, results: List[ReplicationResult]) -> SetupReport:
    accuracy, fps = {}, {}
    cells = sorted({(r.geo, r.k) for r in results})
    for cell in cells:
        cell_results = [r for r in results if (r.geo, r.k) == cell]
        # summed in replication order so the mean is schedule independent
        cell_results.sort(key=lambda r: r.replication)
        accuracy[cell] = sum(r.recall for r in cell_results) / len(cell_results)
        fps[cell] = sum(r.false_positive_count for r in cell_results) / len(cell_results)
    return SetupReport(setup=setup, n_replications=n_replications, accuracy=accuracy,
                       false_positives=fps, results=results)


def run_setup(setup: int, pool: SamplePool, n_replications: int, seed: int,
              selection_rule: SelectionRule = SelectionRule(), noise_scale: float = 1.0,
              n_jobs: int = 1, support_size: int = SUPPORT_SIZE, progress: bool = False,
              n_lambdas: int = DEFAULT_N_LAMBDAS,
              lambda_min_ratio: float = DEFAULT_LAMBDA_MIN_RATIO) -> SetupReport:
    if setup not in _REPLICATORS:
        raise SimulationError(f"unknown setup {setup}, expected 1 or 2")
    if n_replications < 1:
        raise SimulationError("n_replications must be >= 1")
    _check_pool(pool, support_size, min_samples=2)
    matrices = [pool.sample_matrix(sid) for sid in pool.sample_ids]
    replicate = _REPLICATORS[setup]

    logger.info(f"[Sim] Setup {setup}: {n_replications} replications on {pool.geo} "
                f"(S={pool.n_samples}, P={pool.n_terms}, rule={selection_rule})")
    reps = tqdm(range(n_replications), disable=not progress, desc=f"setup {setup} {pool.geo}", leave=False)
    batches = Parallel(n_jobs=n_jobs)(
        delayed(replicate)(matrices, pool.geo, rep, seed, selection_rule, noise_scale, support_size,
                           n_lambdas, lambda_min_ratio)
        for rep in reps
    )
    results = [result for batch in batches for result in batch]
    return _summarize(setup, n_replications, results)


def run_setup1(pool: SamplePool, n_replications: int, seed: int,
               selection_rule: SelectionRule = SelectionRule(), **kwargs) -> SetupReport:
    return run_setup(1, pool, n_replications, seed, selection_rule, **kwargs)


def run_setup2(pool: SamplePool, n_replications: int, seed: int,
               selection_rule: SelectionRule = SelectionRule(), **kwargs) -> SetupReport:
    return run_setup(2, pool, n_replications, seed, selection_rule, **kwargs)


def merge_reports(reports: Sequence[SetupReport]) -> SetupReport:
    """Combine per-geo reports of the same setup into one report."""
    if not reports:
        raise SimulationError("nothing to merge")
    setups = {r.setup for r in reports}
    counts = {r.n_replications for r in reports}
    if len(setups) != 1 or len(counts) != 1:
        raise SimulationError("only reports of one setup and replication count can be merged")
    accuracy, fps, results = {}, {}, []
    for report in reports:
        overlap = set(accuracy) & set(report.accuracy)
        if overlap:
            raise SimulationError(f"cells reported twice: {sorted(overlap)}")
        accuracy.update(report.accuracy)
        fps.update(report.false_positives)
        results.extend(report.results)
    return SetupReport(setup=setups.pop(), n_replications=counts.pop(), accuracy=accuracy,
                       false_positives=fps, results=results)


def table_frame(reports: Sequence[SetupReport]) -> pd.DataFrame:
    """Accuracy summary: one row per setup, one column per (geo, k)."""
    return pd.concat([r.to_frame() for r in sorted(reports, key=lambda r: r.setup)])


def run_experiment(pools: Sequence[SamplePool], setups: Sequence[int], n_replications: int, seed: int,
                   selection_rule: SelectionRule = SelectionRule(), **kwargs) -> List[SetupReport]:
    """Every requested setup over every geo's pool."""
    geos = [p.geo for p in pools]
    if len(set(geos)) != len(geos):
        raise SimulationError("one pool per geo")
    reports = []
    for setup in setups:
        per_geo = [run_setup(setup, pool, n_replications, seed, selection_rule, **kwargs) for pool in pools]
        reports.append(merge_reports(per_geo))
    return reports
