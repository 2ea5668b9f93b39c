"""Code-quality scoring for Ansible repositories.

Nine weighted quality categories over a data-driven attribute catalog:
occurrence counts are scaled per 100 lines of code, min-max normalized
against a corpus baseline (negative attributes inverted), aggregated into
category scores in [0, 1] and a total in [0, 9], with six-month trend
analysis over scored corpora.
"""

from .catalog import (
    CATEGORIES,
    AttributeDefinition,
    ExtractionRule,
    ValidationReport,
    load_catalog,
    load_default_catalog,
    serialize_catalog,
    validate_catalog,
)
from .errors import CatalogError, IacqError, IngestError, ScoringError, TrendError
from .extract import AttributeCounts, extract, measure_entropy, measure_play_task_shape
from .ingest import (
    FileFacts,
    GalaxyMetadata,
    RepoSnapshot,
    YamlDoc,
    count_loc,
    fetch_registry_metadata,
    scan_repo,
)
from .scoring import (
    NormalizationBaseline,
    RateVector,
    RepoScore,
    WeightConfig,
    build_baseline,
    category_score,
    compute_rates,
    normalize,
    score_repo,
    total_score,
)
from .trends import TrendFit, TrendPoint, bucketize, ols_fit

__version__ = "0.1.0"

__all__ = [
    "CATEGORIES",
    "AttributeCounts",
    "AttributeDefinition",
    "CatalogError",
    "ExtractionRule",
    "FileFacts",
    "GalaxyMetadata",
    "IacqError",
    "IngestError",
    "NormalizationBaseline",
    "RateVector",
    "RepoScore",
    "RepoSnapshot",
    "ScoringError",
    "TrendError",
    "TrendFit",
    "TrendPoint",
    "ValidationReport",
    "WeightConfig",
    "YamlDoc",
    "build_baseline",
    "bucketize",
    "category_score",
    "compute_rates",
    "count_loc",
    "extract",
    "fetch_registry_metadata",
    "load_catalog",
    "load_default_catalog",
    "measure_entropy",
    "measure_play_task_shape",
    "normalize",
    "ols_fit",
    "scan_repo",
    "score_repo",
    "serialize_catalog",
    "total_score",
    "validate_catalog",
]
