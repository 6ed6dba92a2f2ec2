from .aggregate_service import CorrelationMatrix, average_pool, correlation_matrix, disjoint_group_averages, pearson
from .catalog_service import Catalog, CatalogEntry, catalog_add, load_pool
from .config_service import ConfigService
from .nowcast_service import NowcastReport, TargetSeries, compare_samples, fit_nowcast, rmse
from .report_export_service import ReportExportService
from .report_service import ReportService, RunManifest
from .sampler_service import LatentPanel, LatentTermSpec, SamplerConfig, draw_pool, draw_sample, gen_latent_panel
from .simulation_service import SetupReport, run_setup1, run_setup2, selection_accuracy
from .vintage_service import VintageSet, average_vintages, build_vintages, vintage_correlations

__all__ = [
    "Catalog",
    "CatalogEntry",
    "ConfigService",
    "CorrelationMatrix",
    "LatentPanel",
    "LatentTermSpec",
    "NowcastReport",
    "ReportExportService",
    "ReportService",
    "RunManifest",
    "SamplerConfig",
    "SetupReport",
    "TargetSeries",
    "VintageSet",
    "average_pool",
    "average_vintages",
    "build_vintages",
    "catalog_add",
    "compare_samples",
    "correlation_matrix",
    "disjoint_group_averages",
    "draw_pool",
    "draw_sample",
    "fit_nowcast",
    "gen_latent_panel",
    "load_pool",
    "pearson",
    "rmse",
    "run_setup1",
    "run_setup2",
    "selection_accuracy",
    "vintage_correlations",
]
