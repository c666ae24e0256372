"""Pattern ensembles, exhaustive pattern-subset search and vehicle filtering."""

from __future__ import annotations

import itertools
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import metrics
from .patterns import DEFAULT_REGISTRY, PatternError, applicable_patterns, instantiate, pattern_number, sort_ids
from .scorer import TaskVocabulary, rank_order, score_many
from .triples import LabeledPair, SimileTriple, TaskType

logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-12
LOG_FLOOR = math.log(PROB_FLOOR)


class CompletionError(ValueError):
    pass


# -- ensemble ---------------------------------------------------------------


@dataclass(frozen=True)
class EnsembleResult:
    """Mean log-probability per word over ``pattern_set``; not renormalized."""

    words: tuple
    scores: np.ndarray = field(repr=False)
    pattern_set: tuple = ()
    triple: Optional[SimileTriple] = None

    def score_map(self) -> dict:
        return dict(zip(self.words, self.scores.tolist()))

    def ranking(self) -> list:
        return [self.words[i] for i in rank_order(self.scores, self.words)]

    def ranked(self) -> list:
        """``(word, score)`` pairs, best first."""
        return [(self.words[i], float(self.scores[i])) for i in rank_order(self.scores, self.words)]


def _resolve_patterns(pattern_ids, task: TaskType, registry=DEFAULT_REGISTRY) -> list:
    ids = set(pattern_ids)
    if not ids:
        raise CompletionError("pattern set must not be empty")
    usable = {p.id for p in registry.applicable(task)}
    for pid in sort_ids(ids):
        if pid not in registry:
            raise CompletionError(f"unknown pattern {pid}")
        if pid not in usable:
            raise CompletionError(f"pattern {pid} is not applicable to {task.value}")
    return [registry[pid] for pid in sort_ids(ids)]


def log_prob_table(model, triples: Sequence[SimileTriple], patterns, vocab: TaskVocabulary) -> np.ndarray:
    """Floored log-probabilities, shape ``(n_triples, n_patterns, |vocab|)``.

    Columns follow ``sorted(vocab.words)``; ``nan`` marks words a pattern
    could not score.
    """
    words = sorted(vocab.words)
    col = {w: j for j, w in enumerate(words)}
    queries = [instantiate(p, t) for t in triples for p in patterns]
    table = np.full((len(queries), len(words)), np.nan)
    for i, cand in enumerate(score_many(model, queries, vocab)):
        idx = [col[w] for w in cand.words]
        table[i, idx] = np.maximum(cand.log_probabilities, LOG_FLOOR)
    return table.reshape(len(triples), len(patterns), len(words))


def _aggregate(rows: np.ndarray) -> tuple:
    """Mean over the pattern axis, restricted to words every pattern scored."""
    keep = ~np.isnan(rows).any(axis=0)
    return keep, rows[:, keep].mean(axis=0)


def ensemble(model, triple: SimileTriple, pattern_ids, vocab: TaskVocabulary,
             registry=DEFAULT_REGISTRY) -> EnsembleResult:
    """Average of the natural-log probabilities each pattern assigns to each word."""
    task = triple.task
    if task is None:
        raise CompletionError(f"triple {triple} is complete; nothing to predict")
    patterns = _resolve_patterns(pattern_ids, task, registry)
    table = log_prob_table(model, [triple], patterns, vocab)[0]
    keep, scores = _aggregate(table)
    words = tuple(w for w, k in zip(sorted(vocab.words), keep) if k)
    return EnsembleResult(words, scores, tuple(p.id for p in patterns), triple)


# -- ranking helpers shared by search and evaluation -----------------------


def top_indices(scores: np.ndarray, k: int) -> np.ndarray:
    """First ``k`` positions of the descending ranking; ties go to the lower index.

    Equivalent to ``rank_order(scores, words)[:k]`` when words are sorted.
    """
    n = len(scores)
    if k >= n:
        return np.lexsort((np.arange(n), -scores))
    threshold = np.partition(scores, n - k)[n - k]
    above = np.flatnonzero(scores > threshold)
    ties = np.flatnonzero(scores == threshold)[: k - len(above)]
    cand = np.concatenate([above, ties])
    return cand[np.lexsort((cand, -scores[cand]))]


def first_hit(scores: np.ndarray, accepted: np.ndarray) -> Optional[int]:
    """1-based rank of the best-ranked accepted position, ``None`` if nothing is accepted."""
    hits = np.flatnonzero(accepted)
    if not len(hits):
        return None
    best = hits[np.argmax(scores[hits])]  # argmax returns the lowest index among ties
    s = scores[best]
    return int(np.count_nonzero(scores > s) + np.count_nonzero(scores[:best] == s)) + 1


# -- search -----------------------------------------------------------------


@dataclass
class SearchReport:
    task: TaskType
    objective: str
    ranked_subsets: list  # (ids tuple, objective value, {metric: value})
    split: str = "train"
    n_items: int = 0

    @property
    def best(self) -> tuple:
        return self.ranked_subsets[0][0]

    @property
    def best_value(self) -> float:
        return self.ranked_subsets[0][1]

    def to_dict(self) -> dict:
        return {
            "task": self.task.value,
            "objective": self.objective,
            "split": self.split,
            "n_items": self.n_items,
            "n_subsets": len(self.ranked_subsets),
            "best": list(self.best),
            "subsets": [{"subset": list(ids), **aux} for ids, _, aux in self.ranked_subsets],
        }

    def to_json(self, path, **extra) -> None:
        Path(path).write_text(json.dumps({**self.to_dict(), **extra}, indent=2) + "\n", encoding="utf-8")

    def format_table(self, top: Optional[int] = 25) -> str:
        rows = self.ranked_subsets if top is None else self.ranked_subsets[:top]
        metric_names = list(rows[0][2]) if rows else []
        header = ["Subset of Patterns"] + metric_names
        body = [["{" + ", ".join(ids) + "}"] + [f"{aux[m]:.3f}" for m in metric_names] for ids, _, aux in rows]
        widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
        lines = [f"Task {self.task.value}, objective {self.objective}, split {self.split}"]
        for r in [header] + body:
            lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
        return "\n".join(lines) + "\n"


def parse_objective(objective: str) -> Optional[int]:
    """``None`` for MRR, ``K`` for ``R@K``."""
    if objective.upper() == "MRR":
        return None
    name, _, k = objective.partition("@")
    if name.upper() == "R" and k.isdigit() and int(k) >= 1:
        return int(k)
    raise CompletionError(f"unknown objective {objective!r}; use 'MRR' or 'R@K'")


def task_items(pairs: Sequence[LabeledPair], task: TaskType) -> list:
    return [item for pair in pairs for item in pair.task_items(task)]


def _subset_metrics(rows_idx, table, accepted, ks, mrr_accepted) -> dict:
    kmax = max(ks) if ks else 0
    rr = 0.0
    hits = dict.fromkeys(ks, 0.0)
    for item_table, acc, macc in zip(table, accepted, mrr_accepted):
        keep, scores = _aggregate(item_table[list(rows_idx)])
        if not keep.all():
            acc, macc = acc[keep], macc[keep]
        if kmax > len(scores):
            raise CompletionError(f"only {len(scores)} scoreable words, cannot compute R@{kmax}")
        rank = first_hit(scores, macc)
        rr += 1.0 / rank if rank else 0.0
        if kmax:
            top = acc[top_indices(scores, kmax)]
            for k in ks:
                hits[k] += np.count_nonzero(top[:k]) / k
    n = len(table)
    out = {"MRR": rr / n}
    out.update({f"R@{k}": hits[k] / n for k in ks})
    return out


def pattern_search(model, dev_set: Sequence[LabeledPair], task, vocab: TaskVocabulary, objective: str = "MRR",
                   ks=metrics.DEFAULT_KS, synonyms=metrics.IDENTITY, mrr_synonyms: bool = True,
                   registry=DEFAULT_REGISTRY, workers: int = 1, split: str = "train") -> SearchReport:
    """Score every non-empty subset of the task's patterns on ``dev_set``.

    Each (item, pattern) pair is scored once; subsets only re-aggregate the
    cached log-probabilities. Subsets are ranked by objective (descending),
    then by size, then by pattern ids.
    """
    task = TaskType(task)
    target_k = parse_objective(objective)
    objective = "MRR" if target_k is None else f"R@{target_k}"
    ks = tuple(sorted(set(ks) | ({target_k} if target_k else set())))
    if not dev_set:
        raise CompletionError("dev set is empty")
    patterns = applicable_patterns(task, registry)
    items = task_items(dev_set, task)
    table = log_prob_table(model, [t for t, _ in items], patterns, vocab)
    words = sorted(vocab.words)
    word_arr = np.array(words, dtype=object)

    def accepted_mask(gold, provider):
        expanded = provider.expand(gold)
        return np.fromiter((w in expanded for w in word_arr), dtype=bool, count=len(words))

    accepted = [accepted_mask(g, synonyms) for _, g in items]
    mrr_accepted = accepted if mrr_synonyms else [accepted_mask(g, metrics.IDENTITY) for _, g in items]

    subsets = [c for r in range(1, len(patterns) + 1) for c in itertools.combinations(range(len(patterns)), r)]
    logger.info("searching %d subsets over %d %s items", len(subsets), len(items), task.value)

    def run(rows_idx):
        return _subset_metrics(rows_idx, table, accepted, ks, mrr_accepted)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, subsets))
    else:
        results = [run(s) for s in subsets]

    ranked = []
    for rows_idx, aux in zip(subsets, results):
        ids = tuple(patterns[i].id for i in rows_idx)
        ranked.append((ids, aux[objective], aux))
    ranked.sort(key=lambda r: (-r[1], len(r[0]), [pattern_number(i) for i in r[0]]))
    return SearchReport(task, objective, ranked, split=split, n_items=len(items))


# -- vehicle filtering ------------------------------------------------------


class EmbeddingTable:
    """Word vectors of one fixed dimension."""

    def __init__(self, vectors: dict):
        self.vectors = {w: np.asarray(v, dtype=float) for w, v in vectors.items()}
        dims = {v.shape for v in self.vectors.values()}
        if len(dims) > 1:
            raise ValueError(f"embedding vectors have mixed shapes: {sorted(dims)}")
        self.dim = dims.pop()[0] if dims else 0

    @classmethod
    def load(cls, path, words=None) -> "EmbeddingTable":
        """Read ``word v1 v2 ...`` lines; a leading ``count dim`` header is skipped.

        ``words`` restricts loading to the given vocabulary.
        """
        wanted = None if words is None else set(words)
        vectors = {}
        with Path(path).open(encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                parts = line.rstrip().split(" ")
                if line_no == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                    continue
                if len(parts) < 2:
                    continue
                word = parts[0]
                if wanted is not None and word not in wanted:
                    continue
                try:
                    vectors[word] = np.array(parts[1:], dtype=float)
                except ValueError:
                    raise ValueError(f"{path}:{line_no}: non-numeric vector") from None
        return cls(vectors)

    def __contains__(self, word):
        return word in self.vectors

    def __len__(self):
        return len(self.vectors)

    def phrase_vector(self, phrase: str) -> Optional[np.ndarray]:
        """Vector of a word, or the mean over the known words of a phrase."""
        if phrase in self.vectors:
            return self.vectors[phrase]
        found = [self.vectors[w] for w in phrase.split() if w in self.vectors]
        if not found:
            return None
        return np.mean(found, axis=0)

    def cosine(self, a: str, b: str) -> Optional[float]:
        va, vb = self.phrase_vector(a), self.phrase_vector(b)
        if va is None or vb is None:
            return None
        return cosine(va, vb)


def cosine(a, b) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine of a zero vector is undefined")
    return float(np.dot(a, b) / (na * nb))


class FilterResult(list):
    """Filtered candidates; ``skipped`` is set when the tenor had no vector."""

    def __init__(self, words=(), removed=(), skipped=False):
        super().__init__(words)
        self.removed = list(removed)
        self.skipped = skipped


def filter_vehicles(tenor: str, candidates: Sequence[str], embeddings: EmbeddingTable,
                    threshold: float = 0.48) -> FilterResult:
    """Drop candidates whose cosine similarity to the tenor is above ``threshold``.

    Candidates without a vector are kept. If the tenor has no vector at all,
    nothing is removed and ``skipped`` is set on the result.
    """
    if not -1.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [-1, 1], got {threshold}")
    tv = embeddings.phrase_vector(tenor)
    if tv is None:
        logger.warning("tenor %r has no embedding; vehicle filtering skipped", tenor)
        return FilterResult(candidates, skipped=True)
    kept, removed = [], []
    for w in candidates:
        wv = embeddings.phrase_vector(w)
        if wv is not None and cosine(tv, wv) > threshold:
            removed.append(w)
        else:
            kept.append(w)
    return FilterResult(kept, removed)


def derive_threshold(train: Sequence[LabeledPair], embeddings: EmbeddingTable) -> float:
    """Largest tenor-vehicle cosine over the scorable training pairs."""
    if not train:
        raise CompletionError("training set is empty")
    sims = [s for s in (embeddings.cosine(p.tenor, p.vehicle) for p in train) if s is not None]
    if not sims:
        raise CompletionError("no training pair has vectors for both tenor and vehicle")
    return max(sims)


@dataclass(frozen=True)
class FilterConfig:
    threshold: Optional[float] = 0.48
    embedding_path: Optional[str] = None
    enabled: bool = True

    @classmethod
    def from_dict(cls, data: dict) -> "FilterConfig":
        return cls(data.get("threshold", 0.48), data.get("embedding_path"), data.get("enabled", True))


def complete(model, triple: SimileTriple, pattern_ids, vocab: TaskVocabulary, k: int = 10,
             embeddings: Optional[EmbeddingTable] = None, threshold: float = 0.48,
             registry=DEFAULT_REGISTRY, with_scores: bool = False) -> list:
    """Top-k completions of ``triple``.

    For SG with ``embeddings`` given, vehicles too similar to the tenor are
    dropped before truncating to ``k``.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    result = ensemble(model, triple, pattern_ids, vocab, registry)
    ranked = result.ranked()
    if embeddings is not None and triple.task is TaskType.SG:
        kept = set(filter_vehicles(triple.tenor, [w for w, _ in ranked], embeddings, threshold))
        ranked = [(w, s) for w, s in ranked if w in kept]
    ranked = ranked[:k]
    return ranked if with_scores else [w for w, _ in ranked]


def check_pattern_ids(pattern_ids, task, registry=DEFAULT_REGISTRY) -> tuple:
    try:
        return tuple(p.id for p in _resolve_patterns(pattern_ids, TaskType(task), registry))
    except PatternError as exc:
        raise CompletionError(str(exc)) from exc
