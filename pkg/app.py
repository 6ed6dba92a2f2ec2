"""
Command-line entry point.

    python app.py synth     [--n-samples 14 --n-terms 20 --n-periods 120 ...]
    python app.py ingest    FILE... --download-date YYYY-MM-DD [--catalog DIR]
    python app.py corr      [--catalog DIR --geo US --terms a,b --group-size 7]
    python app.py simulate  [--setup 1|2|both --reps 1000 --rule bic]
    python app.py nowcast   [--target FILE [--target FILE ...] --catalog DIR --rule cv --raw]
    python app.py vintages  [--n-vintages 3 --step 1 --n-sets 1]

Common options: --seed, --jobs, --out-dir, --config, --verbose, --quiet.
Every command writes manifest.json next to its outputs; passing that file
back with --config repeats the run.
"""

import argparse
import logging
import os
import sys
from datetime import date
from typing import Any, Dict, List, Tuple

import numpy as np
import pandas as pd

from models.errors import CatalogError, TrendsError, UsageError
from models.lasso import SelectionRule
from models.series import MONTHLY, SamplePool, TimeGrid, derive_seed, parse_period
from preprocessing.file_parser import read_file, read_target_csv
from services.aggregate_service import (
    average_pool,
    disjoint_group_averages,
    export_averages,
    export_correlation_matrix,
    group_correlations,
    mean_off_diagonal,
    term_correlations,
)
from services.catalog_service import Catalog
from services.config_service import ConfigService
from services.nowcast_service import (
    PeriodRange,
    TargetSeries,
    build_synthetic_target,
    compare_samples,
    default_windows,
    summary_frame,
)
from services.report_export_service import ReportExportService
from services.report_service import TOOL_VERSION, ReportService
from services.sampler_service import (
    GEO_POPULARITY,
    LatentPanel,
    SamplerConfig,
    default_term_specs,
    draw_pool,
    export_latent_panel,
    gen_latent_panel,
)
from services.simulation_service import run_experiment, table_frame
from services.vintage_service import (
    average_vintages,
    build_vintage_sets,
    peaks_frame,
    vintage_correlations,
    vintages_frame,
)

__version__ = TOOL_VERSION

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

GLOBAL_DEFAULTS = {"seed": 0, "jobs": 1, "out_dir": "out"}

SYNTH_DEFAULTS = {
    "n_samples": 14,
    "n_terms": 20,
    "n_periods": 120,
    "start": "2009-01",
    "sampling_fraction": 0.01,
    "background_rate": 1e7,
    "geos": list(GEO_POPULARITY),
    "popularity": list(GEO_POPULARITY.values()),
}

COMMAND_DEFAULTS = {
    "synth": dict(SYNTH_DEFAULTS),
    "ingest": {"files": [], "download_date": None, "catalog": None},
    "corr": {"catalog": None, "geo": None, "terms": [], "group_size": None},
    "simulate": dict(SYNTH_DEFAULTS, catalog=None, setup="both", reps=1000, rule="bic", noise_scale=1.0),
    "nowcast": dict(SYNTH_DEFAULTS, n_samples=8, geos=["US"], popularity=[0.5], catalog=None, geo=None,
                    target=[], train_start=None, train_end=None, eval_start=None, eval_end=None,
                    rule="cv", raw=False, smooth_window=None, support_size=3, noise_scale=1.0),
    "vintages": {"start": "2004-01", "n_periods": 132, "window_length": 121, "n_vintages": 3, "step": 1,
                 "n_sets": 1, "n_terms": 20, "term_index": 0, "popularity": [1.0],
                 "sampling_fraction": 0.01, "background_rate": 1e7},
}


def _csv_list(text: str) -> List[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def _float_list(text: str) -> List[float]:
    try:
        return [float(item) for item in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed for every random draw")
    common.add_argument("--jobs", type=int, default=None, help="worker processes")
    common.add_argument("--out-dir", dest="out_dir", default=None, help="output directory")
    common.add_argument("--config", default=None, help="JSON config file or a previous manifest.json")
    common.add_argument("--verbose", action="store_true", help="log progress (INFO)")
    common.add_argument("--quiet", action="store_true", help="only log errors, no progress bars")

    synth_options = argparse.ArgumentParser(add_help=False)
    synth_options.add_argument("--n-samples", dest="n_samples", type=int, default=None)
    synth_options.add_argument("--n-terms", dest="n_terms", type=int, default=None)
    synth_options.add_argument("--n-periods", dest="n_periods", type=int, default=None)
    synth_options.add_argument("--start", default=None, help="first month, YYYY-MM")
    synth_options.add_argument("--sampling-fraction", dest="sampling_fraction", type=float, default=None)
    synth_options.add_argument("--background-rate", dest="background_rate", type=float, default=None)
    synth_options.add_argument("--geos", type=_csv_list, default=None, help="comma-separated region codes")
    synth_options.add_argument("--popularity", type=_float_list, default=None,
                               help="comma-separated base-rate scale per geo")

    parser = argparse.ArgumentParser(
        description="Google Trends sampling-noise toolkit",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    subparsers.add_parser("synth", parents=[common, synth_options],
                          help="generate a latent panel and a catalog of repeated samples")

    ingest = subparsers.add_parser("ingest", parents=[common], help="add Trends CSV exports to a catalog")
    ingest.add_argument("files", nargs="+")
    ingest.add_argument("--download-date", dest="download_date", default=None, help="YYYY-MM-DD")
    ingest.add_argument("--catalog", default=None)

    corr = subparsers.add_parser("corr", parents=[common], help="cross-sample correlation matrices")
    corr.add_argument("--catalog", default=None)
    corr.add_argument("--geo", default=None)
    corr.add_argument("--terms", type=_csv_list, default=None)
    corr.add_argument("--group-size", dest="group_size", type=int, default=None)

    simulate = subparsers.add_parser("simulate", parents=[common, synth_options],
                                     help="variable-selection Monte Carlo (single vs averaged samples)")
    simulate.add_argument("--catalog", default=None)
    simulate.add_argument("--setup", default=None, help="1, 2 or both")
    simulate.add_argument("--reps", type=int, default=None, help="replications (200 for a desk-scale run)")
    simulate.add_argument("--rule", default=None, help="bic, cv, cv:<k> or cv:<k>:<seed>")
    simulate.add_argument("--noise-scale", dest="noise_scale", type=float, default=None)

    nowcast = subparsers.add_parser("nowcast", parents=[common, synth_options],
                                    help="per-sample vs averaged nowcast RMSE")
    nowcast.add_argument("--catalog", default=None)
    nowcast.add_argument("--geo", default=None)
    nowcast.add_argument("--target", action="append", default=None,
                         help="period,value CSV, repeat for several targets (synthetic target when absent)")
    for name in ("train_start", "train_end", "eval_start", "eval_end"):
        nowcast.add_argument("--" + name.replace("_", "-"), dest=name, default=None)
    nowcast.add_argument("--rule", default=None)
    nowcast.add_argument("--raw", action="store_const", const=True, default=None,
                         help="score against the raw target instead of its trend")
    nowcast.add_argument("--smooth-window", dest="smooth_window", type=int, default=None)
    nowcast.add_argument("--support-size", dest="support_size", type=int, default=None)
    nowcast.add_argument("--noise-scale", dest="noise_scale", type=float, default=None)

    vintages = subparsers.add_parser("vintages", parents=[common], help="rolling-window vintage instability")
    vintages.add_argument("--start", default=None)
    vintages.add_argument("--n-periods", dest="n_periods", type=int, default=None)
    vintages.add_argument("--window-length", dest="window_length", type=int, default=None)
    vintages.add_argument("--n-vintages", dest="n_vintages", type=int, default=None)
    vintages.add_argument("--step", type=int, default=None)
    vintages.add_argument("--n-sets", dest="n_sets", type=int, default=None)
    vintages.add_argument("--n-terms", dest="n_terms", type=int, default=None)
    vintages.add_argument("--term-index", dest="term_index", type=int, default=None)
    vintages.add_argument("--popularity", type=_float_list, default=None)
    vintages.add_argument("--sampling-fraction", dest="sampling_fraction", type=float, default=None)
    vintages.add_argument("--background-rate", dest="background_rate", type=float, default=None)
    return parser


def configure_logging(verbose: bool, quiet: bool):
    level = logging.ERROR if quiet else (logging.INFO if verbose else logging.WARNING)
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def resolve_config(args: argparse.Namespace, config_service: ConfigService) -> Dict[str, Any]:
    defaults = dict(GLOBAL_DEFAULTS, **COMMAND_DEFAULTS[args.command])
    file_config = config_service.load_file(args.config, args.command) if args.config else {}
    flags = {key: getattr(args, key, None) for key in defaults}
    return config_service.resolve(defaults, flags, file_config)


# ---------- shared pieces ----------

def _month(text: str, what: str) -> date:
    try:
        return parse_period(str(text), MONTHLY)
    except ValueError as e:
        raise UsageError(f"{what}: {e}") from None


def _positive(cfg: Dict[str, Any], *keys: str):
    for key in keys:
        if cfg[key] is None or cfg[key] < 1:
            raise UsageError(f"{key} must be >= 1, got {cfg[key]}")


def _popularity_by_geo(cfg: Dict[str, Any]) -> List[Tuple[str, float]]:
    geos, popularity = list(cfg["geos"]), list(cfg["popularity"])
    if not geos:
        raise UsageError("at least one geo is required")
    if len(popularity) != len(geos):
        raise UsageError(f"{len(geos)} geos but {len(popularity)} popularity values")
    return list(zip(geos, popularity))


def synthetic_panels(cfg: Dict[str, Any]) -> List[Tuple[LatentPanel, SamplerConfig]]:
    """One latent panel and sampler config per configured geo."""
    _positive(cfg, "n_samples", "n_terms")
    if cfg["n_periods"] < 2:
        raise UsageError("n_periods must be >= 2")
    grid = TimeGrid.monthly(_month(cfg["start"], "start"), cfg["n_periods"])
    panels = []
    for geo, popularity in _popularity_by_geo(cfg):
        specs = default_term_specs(cfg["n_terms"], popularity=popularity, seed=cfg["seed"])
        panel = gen_latent_panel(specs, grid, cfg["background_rate"], seed=derive_seed(cfg["seed"], geo), geo=geo)
        sampler = SamplerConfig(sampling_fraction=cfg["sampling_fraction"],
                                seed=derive_seed(cfg["seed"], geo, "sampler"), n_samples=cfg["n_samples"])
        panels.append((panel, sampler))
    return panels


def _catalog_dir(cfg: Dict[str, Any]) -> str:
    return cfg["catalog"] or os.path.join(cfg["out_dir"], "catalog")


def catalog_pools(catalog_dir: str, geo: str = None) -> List[SamplePool]:
    catalog = Catalog.open(catalog_dir)
    geos = [geo] if geo else catalog.geos()
    if not geos:
        raise CatalogError(f"catalog {catalog_dir} is empty")
    return [catalog.load_pool(catalog.queries(g)) for g in geos]


def _rule(text: str) -> SelectionRule:
    return SelectionRule.parse(text)


def _show_progress(cfg_quiet: bool) -> bool:
    return not cfg_quiet and sys.stderr.isatty()


# ---------- commands ----------

def cmd_synth(cfg: Dict[str, Any], exporter: ReportExportService, args) -> List[str]:
    catalog = Catalog(os.path.join(cfg["out_dir"], "catalog"))
    for panel, sampler in synthetic_panels(cfg):
        exporter.write_frame(export_latent_panel(panel), f"latent_{panel.geo}.csv")
        pool = draw_pool(panel, sampler, n_jobs=cfg["jobs"])
        for row in pool.samples:
            for series in row:
                catalog.add(series, series.download_date)
        print(f"[App] {panel.geo}: {pool.n_samples} samples x {pool.n_terms} terms x {len(panel.grid)} periods")
    exporter.written.append(os.path.join("catalog", "index.json"))
    return exporter.written


def cmd_ingest(cfg: Dict[str, Any], exporter: ReportExportService, args) -> List[str]:
    if not cfg["download_date"]:
        raise UsageError("--download-date is required")
    try:
        download_date = date.fromisoformat(cfg["download_date"])
    except ValueError:
        raise UsageError(f"download date {cfg['download_date']!r} is not YYYY-MM-DD") from None
    catalog = Catalog(_catalog_dir(cfg))
    rows = []
    for path in cfg["files"]:
        series = read_file(path, download_date=download_date)
        existing = catalog.entries
        entry = catalog.add(series, download_date)
        status = "duplicate" if entry in existing else "added"
        rows.append({"file": path, "term": series.term, "geo": series.query.geo,
                     "stored_as": entry.file_path, "status": status})
        print(f"[App] {status}: {path} -> {entry.file_path}")
    exporter.write_frame(pd.DataFrame(rows), "ingest.csv")
    return exporter.written


def cmd_corr(cfg: Dict[str, Any], exporter: ReportExportService, args) -> List[str]:
    catalog = Catalog.open(_catalog_dir(cfg))
    geo = cfg["geo"] or (catalog.geos()[0] if catalog.geos() else None)
    if geo is None:
        raise CatalogError("catalog is empty")
    queries = catalog.queries(geo)
    if cfg["terms"]:
        by_term = {q.term: q for q in queries}
        missing = [t for t in cfg["terms"] if t not in by_term]
        if missing:
            raise CatalogError(f"terms not in catalog for {geo}: {', '.join(missing)}")
        queries = [by_term[t] for t in cfg["terms"]]
    pool = catalog.load_pool(queries)

    groups = None
    if cfg["group_size"] is not None:
        _positive(cfg, "group_size")
        n_groups = pool.n_samples // cfg["group_size"]
        groups = disjoint_group_averages(pool, cfg["group_size"], max(n_groups, 1), cfg["seed"])

    summary = []
    for j, query in enumerate(pool.query_set):
        matrix = group_correlations(groups, j) if groups else term_correlations(pool, j)
        filename = f"corr_{geo}_{query.slug}.csv"
        export_correlation_matrix(matrix, exporter.path(filename))
        exporter.written.append(filename)
        summary.append({"term": query.term, "n": len(matrix.labels), "mean_off_diagonal": mean_off_diagonal(matrix)})
    exporter.write_frame(pd.DataFrame(summary), f"corr_summary_{geo}.csv")

    filename = f"averages_{geo}.csv"
    export_averages(average_pool(pool, pool.sample_ids), exporter.path(filename))
    exporter.written.append(filename)
    return exporter.written


def _setups(text: str) -> List[int]:
    text = str(text).strip().lower()
    if text == "both":
        return [1, 2]
    if text in ("1", "2"):
        return [int(text)]
    raise UsageError(f"setup must be 1, 2 or both, got {text!r}")


def cmd_simulate(cfg: Dict[str, Any], exporter: ReportExportService, args) -> List[str]:
    setups = _setups(cfg["setup"])
    _positive(cfg, "reps")
    rule = _rule(cfg["rule"])
    if cfg["catalog"]:
        pools = catalog_pools(cfg["catalog"])
    else:
        pools = [draw_pool(panel, sampler, n_jobs=cfg["jobs"]) for panel, sampler in synthetic_panels(cfg)]
    reports = run_experiment(pools, setups, cfg["reps"], cfg["seed"], rule, noise_scale=cfg["noise_scale"],
                             n_jobs=cfg["jobs"], progress=_show_progress(args.quiet))
    exporter.write_frame(table_frame(reports), "selection_accuracy.csv", index=True)
    for report in reports:
        exporter.write_frame(report.replications_frame(), f"replications_setup{report.setup}.csv")
    return exporter.written


def _file_target(path: str, smooth_window) -> TargetSeries:
    grid, values = read_target_csv(path)
    name = os.path.splitext(os.path.basename(path))[0]
    return TargetSeries.from_values(name, grid, values, smooth_window)


def _synthetic_target(cfg: Dict[str, Any], panel: LatentPanel) -> TargetSeries:
    rng = np.random.default_rng(derive_seed(cfg["seed"], "target", "support"))
    if not 1 <= cfg["support_size"] <= panel.n_terms:
        raise UsageError(f"support_size must be in [1, {panel.n_terms}]")
    support = sorted(int(j) for j in rng.choice(panel.n_terms, size=cfg["support_size"], replace=False))
    beta = rng.uniform(1.0, 2.0, size=len(support))
    logger.info(f"[App] Synthetic target uses terms {[panel.terms[j] for j in support]}")
    return build_synthetic_target(panel, support, beta, cfg["noise_scale"], cfg["seed"],
                                  cfg["smooth_window"], name="synthetic")


def _nowcast_targets(cfg: Dict[str, Any], panel: LatentPanel = None) -> List[TargetSeries]:
    if cfg["target"]:
        return [_file_target(path, cfg["smooth_window"]) for path in cfg["target"]]
    return [_synthetic_target(cfg, panel)]


def _nowcast_windows(cfg: Dict[str, Any], target: TargetSeries) -> Tuple[PeriodRange, PeriodRange]:
    keys = ("train_start", "train_end", "eval_start", "eval_end")
    given = [cfg[k] for k in keys]
    if not any(given):
        return default_windows(target.grid)
    if not all(given):
        raise UsageError("give all of --train-start/--train-end/--eval-start/--eval-end or none")
    try:
        bounds = [parse_period(str(v), target.grid.frequency) for v in given]
    except ValueError as e:
        raise UsageError(str(e)) from None
    return PeriodRange(bounds[0], bounds[1]), PeriodRange(bounds[2], bounds[3])


def cmd_nowcast(cfg: Dict[str, Any], exporter: ReportExportService, args) -> List[str]:
    rule = _rule(cfg["rule"])
    panel = None
    if cfg["catalog"]:
        pool = catalog_pools(cfg["catalog"], cfg["geo"])[0]
    else:
        panels = synthetic_panels(cfg)
        if cfg["geo"]:
            panels = [p for p in panels if p[0].geo == cfg["geo"]]
            if not panels:
                raise UsageError(f"geo {cfg['geo']} is not configured")
        panel, sampler = panels[0]
        pool = draw_pool(panel, sampler, n_jobs=cfg["jobs"])
    if panel is None and not cfg["target"]:
        raise UsageError("--target is required with --catalog")

    reports, models, predictions = [], [], []
    for target in _nowcast_targets(cfg, panel):
        train_window, eval_window = _nowcast_windows(cfg, target)
        report = compare_samples(target, pool, train_window, eval_window, rule, use_trend=not cfg["raw"],
                                 n_jobs=cfg["jobs"])
        reports.append(report)
        models.append(report.models_frame())
        predictions.append(report.predictions_frame(target.grid.frequency))
    exporter.write_frame(summary_frame(reports), "nowcast_rmse.csv", index=True)
    exporter.write_frame(pd.concat(models, ignore_index=True), "nowcast_models.csv")
    exporter.write_frame(pd.concat(predictions, ignore_index=True), "predictions.csv")
    return exporter.written


def cmd_vintages(cfg: Dict[str, Any], exporter: ReportExportService, args) -> List[str]:
    _positive(cfg, "n_sets", "n_terms")
    if cfg["window_length"] < 2:
        raise UsageError("window_length must be >= 2")
    grid = TimeGrid.monthly(_month(cfg["start"], "start"), cfg["n_periods"])
    popularity = cfg["popularity"][0] if cfg["popularity"] else 1.0
    specs = default_term_specs(cfg["n_terms"], popularity=popularity, seed=cfg["seed"])
    panel = gen_latent_panel(specs, grid, cfg["background_rate"], seed=derive_seed(cfg["seed"], "vintages"))
    sampler = SamplerConfig(sampling_fraction=cfg["sampling_fraction"], seed=derive_seed(cfg["seed"], "sampler"))
    base_window = (0, cfg["window_length"] - 1)
    sets = build_vintage_sets(panel, sampler, base_window, cfg["n_vintages"], cfg["step"],
                              n_sets=cfg["n_sets"], term_index=cfg["term_index"], n_jobs=cfg["jobs"])

    first = sets[0]
    exporter.write_frame(vintages_frame(first), "vintages.csv")
    exporter.write_frame(peaks_frame(first), "vintage_peaks.csv")
    if len(first.vintages) > 1:
        export_correlation_matrix(vintage_correlations(first), exporter.path("vintage_corr.csv"))
        exporter.written.append("vintage_corr.csv")
    if len(sets) > 1:
        averaged = average_vintages(sets)
        exporter.write_frame(vintages_frame(averaged), "vintages_avg.csv")
        if len(averaged.vintages) > 1:
            export_correlation_matrix(vintage_correlations(averaged), exporter.path("vintage_corr_avg.csv"))
            exporter.written.append("vintage_corr_avg.csv")
    return exporter.written


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "corr": cmd_corr,
    "simulate": cmd_simulate,
    "nowcast": cmd_nowcast,
    "vintages": cmd_vintages,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    try:
        config_service = ConfigService()
        cfg = resolve_config(args, config_service)
        if cfg["jobs"] < 1 and cfg["jobs"] != -1:
            raise UsageError("--jobs must be >= 1 (or -1 for all cores)")
        if args.command in ("synth", "simulate", "nowcast") and cfg["n_samples"] < 1:
            raise UsageError(f"n_samples must be >= 1, got {cfg['n_samples']}")

        report_service = ReportService()
        manifest = report_service.build_manifest(args.command, cfg, cfg["seed"])
        exporter = ReportExportService(cfg["out_dir"])
        logger.info(f"[App] Running {args.command} (seed={cfg['seed']}, jobs={cfg['jobs']})")
        written = COMMANDS[args.command](cfg, exporter, args)
        report_service.record_outputs(manifest, cfg["out_dir"], written)
        manifest_path = report_service.save_manifest(manifest, cfg["out_dir"])
        for name in written:
            print(os.path.join(cfg["out_dir"], name))
        print(manifest_path)
        return 0
    except UsageError as e:
        print(f"error: UsageError: {e}", file=sys.stderr)
        return 2
    except TrendsError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        # output directory or catalog not writable
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
