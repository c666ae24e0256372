"""Mask-position scoring over a task vocabulary.

Backends map a batch of rendered masked sentences and a word list to raw
logits at the mask position (``nan`` marks a word the backend cannot score as
one unit). :func:`score` turns those logits into a softmax restricted to the
scoreable part of the vocabulary.
"""

from __future__ import annotations

import json
import logging
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .patterns import MASK, MaskedQuery
from .triples import TaskType

logger = logging.getLogger(__name__)


class ScoringError(RuntimeError):
    pass


class BackendLoadError(ScoringError):
    pass


@dataclass(frozen=True)
class TaskVocabulary:
    task: TaskType
    words: tuple

    def __post_init__(self):
        object.__setattr__(self, "task", TaskType(self.task))
        words = tuple(self.words)
        if not words:
            raise ValueError("vocabulary must not be empty")
        if len(set(words)) != len(words):
            raise ValueError("vocabulary contains duplicate words")
        bad = [w for w in words if w != w.lower() or not w.strip() or w != w.strip()]
        if bad:
            raise ValueError(f"vocabulary words must be stripped lowercase strings: {bad[:5]}")
        object.__setattr__(self, "words", words)

    def __len__(self):
        return len(self.words)

    def restrict(self, words) -> "TaskVocabulary":
        keep = set(words)
        return TaskVocabulary(self.task, tuple(w for w in self.words if w in keep))


def load_vocabulary(path, task) -> TaskVocabulary:
    """One word per line; blank lines and ``#`` comments skipped, duplicates collapsed."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"vocabulary file not found: {path}")
    words = []
    seen = set()
    for line in path.read_text(encoding="utf-8").splitlines():
        w = line.strip().lower()
        if not w or w.startswith("#") or w in seen:
            continue
        seen.add(w)
        words.append(w)
    return TaskVocabulary(task, tuple(words))


def write_vocabulary(vocab: TaskVocabulary, path) -> None:
    Path(path).write_text("".join(w + "\n" for w in vocab.words), encoding="utf-8")


@dataclass(frozen=True)
class ScoredCandidates:
    """Restricted mask distribution, sorted by probability then word."""

    words: tuple
    probabilities: np.ndarray = field(repr=False)
    log_probabilities: np.ndarray = field(repr=False)
    query: Optional[MaskedQuery] = None
    excluded: tuple = ()

    @property
    def entries(self) -> list:
        return list(zip(self.words, self.probabilities.tolist(), self.log_probabilities.tolist()))

    def as_dict(self) -> dict:
        return dict(zip(self.words, self.probabilities.tolist()))

    def log_prob_map(self) -> dict:
        return dict(zip(self.words, self.log_probabilities.tolist()))

    def __len__(self):
        return len(self.words)


def rank_order(scores: np.ndarray, words: Sequence[str]) -> np.ndarray:
    """Indices sorting ``scores`` descending, ties broken by word ascending."""
    return np.lexsort((np.asarray(words, dtype=object).astype(str), -np.asarray(scores, dtype=float)))


def restricted_softmax(logits: np.ndarray) -> np.ndarray:
    """Log-softmax over the finite-or-minus-inf entries of ``logits``."""
    logits = np.asarray(logits, dtype=float)
    top = np.max(logits)
    if not np.isfinite(top):
        raise ScoringError("no word has a finite logit")
    shifted = logits - top
    return shifted - math.log(np.sum(np.exp(shifted)))


# -- backends ---------------------------------------------------------------


class MockBackend:
    """Fixture-driven backend: ``{default_logit, queries: {text: {word: logit}}}``.

    Queries are matched on their abstract text (mask written as ``MASK``).
    Words listed under ``unscoreable`` behave like multi-piece words of a real
    tokenizer and get ``nan``.
    """

    mask_literal = MASK

    def __init__(self, queries: dict, default_logit: float = 0.0, unscoreable=()):
        self.queries = {str(q): {str(w): float(v) for w, v in row.items()} for q, row in queries.items()}
        self.default_logit = float(default_logit)
        self.unscoreable = frozenset(unscoreable)

    @classmethod
    def from_file(cls, path) -> "MockBackend":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise BackendLoadError(f"mock fixture not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise BackendLoadError(f"mock fixture {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict) or "default_logit" not in data or not isinstance(data.get("queries"), dict):
            raise BackendLoadError(f"mock fixture {path} needs 'default_logit' and a 'queries' object")
        try:
            return cls(data["queries"], data["default_logit"], data.get("unscoreable", ()))
        except (TypeError, ValueError, AttributeError) as exc:
            raise BackendLoadError(f"malformed mock fixture {path}: {exc}") from exc

    def logits(self, texts: Sequence[str], words: Sequence[str]) -> np.ndarray:
        out = np.empty((len(texts), len(words)), dtype=float)
        for i, text in enumerate(texts):
            row = self.queries.get(text, {})
            for j, w in enumerate(words):
                out[i, j] = np.nan if w in self.unscoreable else row.get(w, self.default_logit)
        return out


class PretrainedBackend:
    """Adapter around a Hugging Face masked LM.

    A word is scoreable when the tokenizer maps it to exactly one known
    token. Sentences are grouped by token length so no padding enters the
    forward pass and batching does not change the logits.
    """

    def __init__(self, identifier: str, device: str = "cpu", batch_size: int = 32):
        try:
            import torch
            from transformers import AutoModelForMaskedLM, AutoTokenizer
        except ImportError as exc:  # pragma: no cover - depends on environment
            raise BackendLoadError("the pretrained backend needs torch and transformers") from exc
        self._torch = torch
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(identifier)
            self.model = AutoModelForMaskedLM.from_pretrained(identifier)
        except (OSError, ValueError) as exc:
            raise BackendLoadError(f"cannot load masked LM {identifier!r}: {exc}") from exc
        self.model.to(device)
        self.model.eval()
        self.device = device
        self.batch_size = batch_size
        self.mask_literal = self.tokenizer.mask_token
        self._word_ids = {}
        self._lock = threading.Lock()

    def token_id(self, word: str) -> Optional[int]:
        with self._lock:
            if word not in self._word_ids:
                pieces = self.tokenizer.tokenize(word)
                tid = None
                if len(pieces) == 1:
                    tid = self.tokenizer.convert_tokens_to_ids(pieces[0])
                    if tid == self.tokenizer.unk_token_id:
                        tid = None
                self._word_ids[word] = tid
            return self._word_ids[word]

    def logits(self, texts: Sequence[str], words: Sequence[str]) -> np.ndarray:
        torch = self._torch
        ids = [self.token_id(w) for w in words]
        ok = [j for j, t in enumerate(ids) if t is not None]
        ok_ids = torch.tensor([ids[j] for j in ok], dtype=torch.long)
        out = np.full((len(texts), len(words)), np.nan)
        encoded = [self.tokenizer(t)["input_ids"] for t in texts]
        by_len = {}
        for i, enc in enumerate(encoded):
            if enc.count(self.tokenizer.mask_token_id) != 1:
                raise ScoringError(f"expected one mask token in {texts[i]!r}")
            by_len.setdefault(len(enc), []).append(i)
        with torch.no_grad():
            for _, rows in sorted(by_len.items()):
                for start in range(0, len(rows), self.batch_size):
                    chunk = rows[start:start + self.batch_size]
                    input_ids = torch.tensor([encoded[i] for i in chunk], device=self.device)
                    logits = self.model(input_ids=input_ids).logits
                    pos = (input_ids == self.tokenizer.mask_token_id).nonzero()[:, 1]
                    at_mask = logits[torch.arange(len(chunk)), pos].float().cpu()
                    if ok:
                        out[np.ix_(chunk, ok)] = at_mask[:, ok_ids].numpy()
        return out


@dataclass(frozen=True)
class ModelRef:
    backend_kind: str
    identifier: str
    mask_literal: str = MASK
    device: str = "cpu"

    def __post_init__(self):
        if self.backend_kind not in ("mock", "pretrained"):
            raise ValueError(f"backend_kind must be 'mock' or 'pretrained', got {self.backend_kind!r}")

    def to_dict(self) -> dict:
        return {"backend_kind": self.backend_kind, "identifier": self.identifier,
                "mask_literal": self.mask_literal, "device": self.device}


_BACKENDS = {}
_BACKENDS_LOCK = threading.Lock()


def get_backend(model):
    """Return the loaded backend for a :class:`ModelRef`; backend objects pass through."""
    if not isinstance(model, ModelRef):
        return model
    with _BACKENDS_LOCK:
        if model not in _BACKENDS:
            if model.backend_kind == "mock":
                _BACKENDS[model] = MockBackend.from_file(model.identifier)
            else:
                _BACKENDS[model] = PretrainedBackend(model.identifier, device=model.device)
        return _BACKENDS[model]


def load_mock(fixture) -> ModelRef:
    ref = ModelRef("mock", str(Path(fixture)), MASK)
    get_backend(ref)
    return ref


def load_pretrained(identifier: str, device: str = "cpu") -> ModelRef:
    probe = ModelRef("pretrained", identifier, device=device)
    backend = get_backend(probe)
    ref = ModelRef("pretrained", identifier, backend.mask_literal, device)
    with _BACKENDS_LOCK:
        _BACKENDS[ref] = backend
    return ref


def _candidates(query, words, logits) -> ScoredCandidates:
    logits = np.asarray(logits, dtype=float)
    scoreable = ~np.isnan(logits)
    excluded = tuple(w for w, ok in zip(words, scoreable) if not ok)
    if not scoreable.any():
        raise ScoringError(f"no vocabulary word is scoreable for {query.text if query else 'query'!r}")
    # canonical word order so the normalizer does not depend on input order
    kept = sorted((w, v) for w, v, ok in zip(words, logits, scoreable) if ok)
    kept_words = [w for w, _ in kept]
    logp = restricted_softmax(np.array([v for _, v in kept]))
    order = rank_order(logp, kept_words)
    logp = logp[order]
    return ScoredCandidates(
        words=tuple(kept_words[i] for i in order),
        probabilities=np.exp(logp),
        log_probabilities=logp,
        query=query,
        excluded=excluded,
    )


def score_many(model, queries: Sequence[MaskedQuery], vocab: TaskVocabulary) -> list:
    """Score several queries with one backend call."""
    if not queries:
        return []
    backend = get_backend(model)
    texts = [q.render(backend.mask_literal) for q in queries]
    logits = backend.logits(texts, vocab.words)
    return [_candidates(q, vocab.words, row) for q, row in zip(queries, logits)]


def score(model: Union[ModelRef, MockBackend, PretrainedBackend], query: MaskedQuery,
          vocab: TaskVocabulary) -> ScoredCandidates:
    """Softmax of the backend's mask logits, restricted to ``vocab``.

    Words the backend cannot score are left out and listed in ``excluded``.
    """
    return score_many(model, [query], vocab)[0]


def top_k(candidates: ScoredCandidates, k: int) -> list:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return list(candidates.words[:k])


def scoreable_words(model, vocab: TaskVocabulary) -> TaskVocabulary:
    """Drop the words the backend cannot score as a single unit."""
    backend = get_backend(model)
    probe = MaskedQuery(MASK + ".", "attribute", "probe")
    row = backend.logits([probe.render(backend.mask_literal)], vocab.words)[0]
    kept = [w for w, v in zip(vocab.words, row) if not np.isnan(v)]
    dropped = len(vocab) - len(kept)
    if dropped:
        logger.info("dropped %d unscoreable words from the %s vocabulary", dropped, vocab.task.value)
    return vocab.restrict(kept)
