"""Simile triple completion by probing masked language models."""

__version__ = "0.1.0"

from .completion import (
    EmbeddingTable,
    EnsembleResult,
    SearchReport,
    complete,
    derive_threshold,
    ensemble,
    filter_vehicles,
    pattern_search,
)
from .estimator import SimileCompleter, VehicleFilter
from .metrics import EvalRecord, common_word_report, is_correct, mrr, p_at_k, r_at_k
from .patterns import DEFAULT_REGISTRY, MASK, MaskedQuery, Pattern, PatternClass, applicable_patterns, instantiate
from .scorer import ModelRef, ScoredCandidates, TaskVocabulary, load_mock, score, top_k
from .triples import LabeledPair, SimileTriple, SplitDataset, TaskType, load_norms, split

__all__ = [
    "DEFAULT_REGISTRY", "MASK", "EmbeddingTable", "EnsembleResult", "EvalRecord", "LabeledPair",
    "MaskedQuery", "ModelRef", "Pattern", "PatternClass", "ScoredCandidates", "SearchReport",
    "SimileCompleter", "SimileTriple", "SplitDataset", "TaskType", "TaskVocabulary", "VehicleFilter",
    "applicable_patterns", "common_word_report", "complete", "derive_threshold", "ensemble",
    "filter_vehicles", "instantiate", "is_correct", "load_mock", "load_norms", "mrr", "p_at_k",
    "pattern_search", "r_at_k", "score", "split", "top_k",
]
