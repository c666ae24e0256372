"""Adjective-noun mask training data and the secondary MLM fine-tuning run.

Each kept corpus sentence yields one example in which either the noun or the
adjective of its first ``amod`` relation is masked. A word form is masked at
most ``cap`` times across the whole dataset.
"""

from __future__ import annotations

import json
import logging
import random
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Iterable, Iterator, NamedTuple, Optional

from .scorer import ModelRef

logger = logging.getLogger(__name__)

NOUN, ADJECTIVE = "noun", "adjective"
# 68k noun-masked out of 98k sentences
DEFAULT_NOUN_RATIO = 68 / 98
MAX_WORDS = 64


class AntError(RuntimeError):
    pass


class Token(NamedTuple):
    id: int  # 1-based position
    form: str
    upos: str
    head: int  # 0 for the root
    deprel: str


Parse = list  # list[Token]
Parser = Callable[[str], Parse]


@dataclass(frozen=True)
class AntExample:
    text: str
    mask_index: int
    masked_word: str
    pos: str

    def __post_init__(self):
        if self.pos not in (NOUN, ADJECTIVE):
            raise ValueError(f"pos must be {NOUN!r} or {ADJECTIVE!r}, got {self.pos!r}")
        words = self.words
        if not 0 <= self.mask_index < len(words):
            raise ValueError(f"mask_index {self.mask_index} outside sentence of {len(words)} words")
        if words[self.mask_index] != self.masked_word:
            raise ValueError(f"word at {self.mask_index} is {words[self.mask_index]!r}, not {self.masked_word!r}")

    @property
    def words(self) -> list:
        return self.text.split(" ")

    def masked_text(self, mask_literal: str = "[MASK]") -> str:
        words = self.words
        words[self.mask_index] = mask_literal
        return " ".join(words)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SkipReport:
    too_long: int = 0
    no_amod: int = 0
    parse_error: int = 0
    capped: int = 0

    @property
    def total(self) -> int:
        return self.too_long + self.no_amod + self.parse_error + self.capped

    def to_text(self) -> str:
        lines = [f"{f.name}\t{getattr(self, f.name)}" for f in fields(self)]
        lines.append(f"total\t{self.total}")
        return "\n".join(lines) + "\n"


@dataclass
class AntDataset:
    examples: list
    skipped: SkipReport = field(default_factory=SkipReport)

    @property
    def pos_counts(self) -> Counter:
        return Counter(e.pos for e in self.examples)

    @property
    def word_counts(self) -> Counter:
        return Counter(e.masked_word for e in self.examples)

    def stats(self) -> dict:
        words = self.word_counts
        return {
            "examples": len(self.examples),
            "pos": {NOUN: self.pos_counts[NOUN], ADJECTIVE: self.pos_counts[ADJECTIVE]},
            "distinct_masked_words": len(words),
            "max_masks_per_word": max(words.values(), default=0),
            "masked_words": dict(sorted(words.items())),
            "skipped": asdict(self.skipped),
        }

    def __len__(self):
        return len(self.examples)

    def to_jsonl(self, path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            for ex in self.examples:
                fh.write(json.dumps(ex.to_dict(), ensure_ascii=False) + "\n")

    @classmethod
    def from_jsonl(cls, path) -> "AntDataset":
        path = Path(path)
        if not path.is_file():
            raise AntError(f"ANT dataset not found: {path}")
        examples = []
        with path.open(encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    examples.append(AntExample(**json.loads(line)))
                except (TypeError, ValueError) as exc:
                    raise AntError(f"{path}:{line_no}: bad ANT record: {exc}") from exc
        return cls(examples)


def read_conllu(path) -> Iterator[tuple]:
    """Yield ``(text, tokens)`` for each sentence of a CoNLL-U file.

    Multi-word token ranges and empty nodes are skipped.
    """
    tokens = []
    text = None
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                if tokens:
                    yield text or " ".join(t.form for t in tokens), tokens
                tokens, text = [], None
                continue
            if line.startswith("#"):
                if line.startswith("# text ="):
                    text = line.split("=", 1)[1].strip()
                continue
            cols = line.split("\t")
            if len(cols) != 10:
                raise AntError(f"bad CoNLL-U line: {line!r}")
            if "-" in cols[0] or "." in cols[0]:
                continue
            head = int(cols[6]) if cols[6] != "_" else 0
            tokens.append(Token(int(cols[0]), cols[1], cols[3], head, cols[7]))
    if tokens:
        yield text or " ".join(t.form for t in tokens), tokens


def amod_relations(tokens) -> list:
    """``(adjective_token, noun_token)`` pairs in surface order of the adjective."""
    by_id = {t.id: t for t in tokens}
    rels = []
    for t in tokens:
        if t.deprel.split(":")[0] == "amod" and t.head in by_id:
            rels.append((t, by_id[t.head]))
    return sorted(rels, key=lambda r: r[0].id)


def build_ant_dataset(corpus: Iterable, parser: Optional[Parser] = None, cap: int = 5,
                      noun_ratio: float = DEFAULT_NOUN_RATIO, max_words: int = MAX_WORDS) -> AntDataset:
    """Select and mask amod-bearing sentences from ``corpus``.

    ``corpus`` yields raw sentences (parsed with ``parser``) or already parsed
    ``(text, tokens)`` pairs. Sentences are processed in corpus order. The
    noun of the first amod relation is preferred whenever the running share
    of noun-masked examples is at or below ``noun_ratio``; if the preferred
    word already hit ``cap`` the other word is used, and when both are
    capped the sentence is skipped.
    """
    if cap < 1:
        raise ValueError("cap must be a positive integer")
    if not 0 <= noun_ratio <= 1:
        raise ValueError("noun_ratio must lie in [0, 1]")
    counts: Counter = Counter()
    skipped = SkipReport()
    examples = []
    n_nouns = 0
    for item in corpus:
        try:
            if isinstance(item, str):
                if parser is None:
                    raise AntError("raw sentences need a parser")
                tokens = list(parser(item))
            else:
                _, tokens = item
                tokens = list(tokens)
        except AntError:
            raise
        except Exception as exc:
            logger.debug("parser failed on %r: %s", item, exc)
            skipped.parse_error += 1
            continue
        if not tokens:
            skipped.parse_error += 1
            continue
        if len(tokens) >= max_words:
            skipped.too_long += 1
            continue
        rels = amod_relations(tokens)
        if not rels:
            skipped.no_amod += 1
            continue
        adj, noun = rels[0]
        choices = [(noun, NOUN), (adj, ADJECTIVE)]
        if n_nouns > noun_ratio * len(examples):
            choices.reverse()
        words = [t.form.lower() for t in tokens]
        for tok, pos in choices:
            word = words[tok.id - 1]
            if counts[word] < cap:
                break
        else:
            skipped.capped += 1
            continue
        counts[word] += 1
        n_nouns += pos == NOUN
        examples.append(AntExample(" ".join(words), tok.id - 1, word, pos))
    if not examples:
        raise AntError("empty ANT dataset: no sentence qualified")
    return AntDataset(examples, skipped)


def spacy_parser(model: str = "en_core_web_sm") -> Parser:
    """Wrap a spaCy pipeline as a parser; spaCy's English labels use ``amod`` too."""
    import spacy  # optional dependency

    nlp = spacy.load(model)

    def parse(sentence):
        doc = nlp(sentence)
        return [Token(t.i + 1, t.text, t.pos_, 0 if t.head.i == t.i else t.head.i + 1, t.dep_) for t in doc]

    return parse


# -- fine-tuning ------------------------------------------------------------


@dataclass
class TrainingManifest:
    dataset_path: str
    base_model: str
    output_dir: str
    optimizer: str = "Adam"
    learning_rate: float = 5e-5
    batch_size: int = 32
    max_sequence_length: int = 64
    epochs: int = 3
    seed: int = 42
    warmup_steps: int = 0
    weight_decay: float = 0.0
    device: str = "cpu"

    def __post_init__(self):
        if self.optimizer != "Adam":
            raise ValueError(f"only the Adam optimizer is supported, got {self.optimizer!r}")
        for name in ("learning_rate", "batch_size", "max_sequence_length"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.epochs < 0 or self.warmup_steps < 0 or self.weight_decay < 0:
            raise ValueError("epochs, warmup_steps and weight_decay must be non-negative")

    @classmethod
    def from_json(cls, path) -> "TrainingManifest":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown manifest fields: {sorted(unknown)}")
        return cls(**data)

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2) + "\n", encoding="utf-8")


def encode_example(tokenizer, example: AntExample, max_length: int) -> Optional[tuple]:
    """Token ids with every word piece of the masked word replaced by the mask token.

    Returns ``None`` when truncation cuts off the masked word.
    """
    enc = tokenizer(example.words, is_split_into_words=True, truncation=True, max_length=max_length)
    input_ids = list(enc["input_ids"])
    labels = [-100] * len(input_ids)
    hit = False
    for i, wid in enumerate(enc.word_ids()):
        if wid == example.mask_index:
            labels[i] = input_ids[i]
            input_ids[i] = tokenizer.mask_token_id
            hit = True
    return (input_ids, labels) if hit else None


def finetune(manifest: TrainingManifest, log_every: int = 50) -> ModelRef:
    """Continue MLM training of ``manifest.base_model`` on an ANT dataset.

    Only the pre-selected word of each example is masked. Weights and
    tokenizer are written to ``manifest.output_dir``.
    """
    dataset = AntDataset.from_jsonl(manifest.dataset_path)
    if not len(dataset):
        raise AntError(f"ANT dataset {manifest.dataset_path} is empty")

    import torch
    from transformers import AutoModelForMaskedLM, AutoTokenizer, get_constant_schedule_with_warmup

    try:
        tokenizer = AutoTokenizer.from_pretrained(manifest.base_model)
        model = AutoModelForMaskedLM.from_pretrained(manifest.base_model)
    except (OSError, ValueError) as exc:
        raise AntError(f"cannot load base model {manifest.base_model!r}: {exc}") from exc

    random.seed(manifest.seed)
    torch.manual_seed(manifest.seed)
    encoded = []
    for ex in dataset.examples:
        item = encode_example(tokenizer, ex, manifest.max_sequence_length)
        if item is not None:
            encoded.append(item)
    if not encoded:
        raise AntError("no example survived tokenization")
    logger.info("fine-tuning on %d examples (%d dropped by truncation)", len(encoded),
                len(dataset) - len(encoded))

    model.to(manifest.device)
    model.train()
    optimizer = torch.optim.Adam(model.parameters(), lr=manifest.learning_rate,
                                 weight_decay=manifest.weight_decay)
    scheduler = get_constant_schedule_with_warmup(optimizer, manifest.warmup_steps)
    gen = torch.Generator().manual_seed(manifest.seed)
    pad_id = tokenizer.pad_token_id
    step = 0
    for epoch in range(manifest.epochs):
        order = torch.randperm(len(encoded), generator=gen).tolist()
        for start in range(0, len(order), manifest.batch_size):
            batch = [encoded[i] for i in order[start:start + manifest.batch_size]]
            width = max(len(ids) for ids, _ in batch)
            input_ids = torch.full((len(batch), width), pad_id, dtype=torch.long)
            labels = torch.full((len(batch), width), -100, dtype=torch.long)
            attention = torch.zeros((len(batch), width), dtype=torch.long)
            for row, (ids, labs) in enumerate(batch):
                input_ids[row, :len(ids)] = torch.tensor(ids)
                labels[row, :len(labs)] = torch.tensor(labs)
                attention[row, :len(ids)] = 1
            out = model(input_ids=input_ids.to(manifest.device), attention_mask=attention.to(manifest.device),
                        labels=labels.to(manifest.device))
            out.loss.backward()
            optimizer.step()
            scheduler.step()
            optimizer.zero_grad()
            step += 1
            if step % log_every == 0 or step == 1:
                logger.info("epoch %d step %d loss %.4f", epoch, step, out.loss.item())

    out_dir = Path(manifest.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model.eval()
    model.save_pretrained(out_dir)
    tokenizer.save_pretrained(out_dir)
    manifest.to_json(out_dir / "training_manifest.json")
    return ModelRef("pretrained", str(out_dir), tokenizer.mask_token, manifest.device)
