"""Automatic evaluation: diversity, MRR, synonym-expanded R@K and common-word rates."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .triples import LabeledPair, SimileTriple, TaskType

DEFAULT_KS = (5, 10, 15, 25, 50)
# common words named in the diversity discussion; the figure's full axis is not recoverable
DEFAULT_PROBE_WORDS = ("good", "big", "strong")


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class EvalRecord:
    """One evaluated triple: the gold words and the ranked predictions."""

    triple: SimileTriple
    gold: tuple
    predictions: tuple
    pair: Optional[LabeledPair] = None

    def __post_init__(self):
        object.__setattr__(self, "gold", tuple(self.gold))
        object.__setattr__(self, "predictions", tuple(self.predictions))
        if not self.gold:
            raise MetricError(f"record {self.triple} has no gold words")
        if len(set(self.predictions)) != len(self.predictions):
            raise MetricError(f"record {self.triple} has duplicate predictions")

    @property
    def task(self) -> TaskType:
        return self.triple.task


class SynonymProvider:
    """Identity lookup; subclasses add synonyms. ``lookup(w)`` always contains ``w``."""

    name = "identity"

    def lookup(self, word: str) -> frozenset:
        return frozenset({word})

    def expand(self, labels: Iterable[str]) -> frozenset:
        out = set()
        for label in labels:
            out |= self.lookup(label)
        return frozenset(out)


class DictSynonyms(SynonymProvider):
    name = "fixture"

    def __init__(self, table: dict):
        self.table = {k.lower(): frozenset(w.lower() for w in v) for k, v in table.items()}

    @classmethod
    def from_json(cls, path) -> "DictSynonyms":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def lookup(self, word):
        return self.table.get(word, frozenset()) | {word}


class WordNetSynonyms(SynonymProvider):
    """Lemma names of every synset of the word, single words only, lowercased.

    Needs ``nltk`` with the WordNet corpus unless a compatible ``wordnet``
    object is passed in.
    """

    name = "wordnet"

    def __init__(self, wordnet=None):
        if wordnet is None:
            from nltk.corpus import wordnet  # optional dependency
        self.wordnet = wordnet
        self._cache = {}

    def lookup(self, word):
        if word not in self._cache:
            names = {word}
            for synset in self.wordnet.synsets(word):
                for lemma in synset.lemma_names():
                    if "_" not in lemma and " " not in lemma and "-" not in lemma:
                        names.add(lemma.lower())
            self._cache[word] = frozenset(names)
        return self._cache[word]


IDENTITY = SynonymProvider()


def _check_depth(records: Sequence[EvalRecord], k: int) -> None:
    if k < 1:
        raise MetricError(f"k must be >= 1, got {k}")
    if not records:
        raise MetricError("no records to evaluate")
    for i, r in enumerate(records):
        if len(r.predictions) < k:
            raise MetricError(f"record {i} {r.triple} has {len(r.predictions)} predictions, need {k}")


def is_correct(word: str, labels: Iterable[str], synonyms: SynonymProvider = IDENTITY) -> bool:
    return word in synonyms.expand(labels)


def p_at_k(records: Sequence[EvalRecord], k: int) -> float:
    """Distinct words across all top-k lists divided by ``k * N``."""
    _check_depth(records, k)
    unique = set()
    for r in records:
        unique.update(r.predictions[:k])
    return len(unique) / (k * len(records))


def first_hit_rank(predictions: Sequence[str], accepted: frozenset) -> Optional[int]:
    for rank, word in enumerate(predictions, start=1):
        if word in accepted:
            return rank
    return None


def mrr(records: Sequence[EvalRecord], synonyms: SynonymProvider = IDENTITY) -> float:
    """Mean of 1/rank of the first correct prediction (0 when none is correct)."""
    if not records:
        raise MetricError("no records to evaluate")
    total = 0.0
    for r in records:
        if not r.predictions:
            raise MetricError(f"record {r.triple} has no predictions")
        rank = first_hit_rank(r.predictions, synonyms.expand(r.gold))
        total += 1.0 / rank if rank else 0.0
    return total / len(records)


def r_at_k(records: Sequence[EvalRecord], k: int, synonyms: SynonymProvider = IDENTITY) -> float:
    """Mean fraction of the top-k predictions that are correct.

    Kept under its conventional name although it is shaped like precision.
    """
    _check_depth(records, k)
    total = 0.0
    for r in records:
        accepted = synonyms.expand(r.gold)
        total += sum(w in accepted for w in r.predictions[:k]) / k
    return total / len(records)


def common_word_report(records: Sequence[EvalRecord], probe_words: Iterable[str], k: int) -> dict:
    """Percentage of records whose top-k list contains each probe word."""
    _check_depth(records, k)
    tops = [set(r.predictions[:k]) for r in records]
    return {w: 100.0 * sum(w in top for top in tops) / len(records) for w in probe_words}


def evaluate(records: Sequence[EvalRecord], ks=DEFAULT_KS, synonyms: SynonymProvider = IDENTITY,
             mrr_synonyms: bool = True) -> dict:
    """MRR plus R@K for each K, keyed ``"MRR"`` and ``"R@<K>"``."""
    out = {"MRR": mrr(records, synonyms if mrr_synonyms else IDENTITY)}
    for k in ks:
        out[f"R@{k}"] = r_at_k(records, k, synonyms)
    return out


def load_probe_words(path) -> list:
    return [w.strip().lower() for w in Path(path).read_text(encoding="utf-8").splitlines()
            if w.strip() and not w.startswith("#")]


def metric_rows(values: dict, **context) -> list:
    """One ``{metric, k, value, ...context}`` row per metric value."""
    rows = []
    for name, value in values.items():
        metric, _, k = name.partition("@")
        rows.append({"metric": metric, "k": int(k) if k else None, "value": value, **context})
    return rows


def write_table_csv(path, rows: Sequence[dict], columns: Sequence[str]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
