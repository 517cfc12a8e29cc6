"""Mining image-posting behaviour from moment corpora.

Pipeline: ingest a JSONL corpus, cluster image embeddings into
categories, characterize users by frequency/inertia/singleness metrics,
predict selfie-posting behaviours with cross-validated max-margin
classifiers, and type users by non-negative matrix factorization.
"""
from . import charmetrics, cluster, corpus, factorize, learn, stats, synth, taxonomy
from .errors import (
    ConfigError,
    MinerError,
    ParseError,
    PreconditionError,
    SchemaError,
    UndefinedResultError,
)

__all__ = [
    "charmetrics",
    "cluster",
    "corpus",
    "factorize",
    "learn",
    "stats",
    "synth",
    "taxonomy",
    "MinerError",
    "ParseError",
    "SchemaError",
    "ConfigError",
    "PreconditionError",
    "UndefinedResultError",
]

__version__ = "0.1.0"
