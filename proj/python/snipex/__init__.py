from _snipex import (
    bootstrap_diff,
    classify,
    extract_missing_module,
    prepare_source,
    ranksum,
    rates,
    run_source,
    taxonomy,
    taxonomy_version,
    top_imports,
)

__all__ = [
    "bootstrap_diff",
    "classify",
    "extract_missing_module",
    "prepare_source",
    "ranksum",
    "rates",
    "run_source",
    "taxonomy",
    "taxonomy_version",
    "top_imports",
]
