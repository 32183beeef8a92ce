"""Multilabel weight imprinting over frozen embeddings."""

from ._core import (
    METRICS,
    Classifier,
    ConfigError,
    DataError,
    Dataset,
    Error,
    best_threshold,
    compute_metrics,
    generate_synthetic,
    load_dataset,
    run_continual,
    run_fewshot,
    sample_episodes,
    save_dataset,
    validate,
)

__all__ = [
    "METRICS",
    "Classifier",
    "ConfigError",
    "DataError",
    "Dataset",
    "Error",
    "best_threshold",
    "compute_metrics",
    "generate_synthetic",
    "load_dataset",
    "run_continual",
    "run_fewshot",
    "sample_episodes",
    "save_dataset",
    "validate",
]
