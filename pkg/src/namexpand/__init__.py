"""Toolkit for fabricating abbreviated/expanded column-name corpora from
tables and evaluating expansion models with EM and token-F1 metrics."""

__version__ = "0.1.0"

from .abbrev import FabricationConfig, NamePair, fabricate_corpus
from .corpus import FilterCriteria, Table, filter_tables, ingest_csv
from .difficulty import DifficultyLevel, DifficultyThresholds, classify
from .metrics import EvalReport, aggregate, exact_match, token_f1
from .promptkit import PromptBundle, build_bundles, extract_answers
from .segment import is_logical_name, lemmatize, split_identifier

__all__ = [
    "__version__",
    "FabricationConfig",
    "NamePair",
    "fabricate_corpus",
    "FilterCriteria",
    "Table",
    "filter_tables",
    "ingest_csv",
    "DifficultyLevel",
    "DifficultyThresholds",
    "classify",
    "EvalReport",
    "aggregate",
    "exact_match",
    "token_f1",
    "PromptBundle",
    "build_bundles",
    "extract_answers",
    "is_logical_name",
    "lemmatize",
    "split_identifier",
]
