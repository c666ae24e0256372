"""Simile triples and the tenor/vehicle norms dataset.

A norms file is tab-separated with four columns per record::

    tenor<TAB>attribute<TAB>vehicle<TAB>frequency

Lines starting with ``#`` and blank lines are ignored.
"""

from __future__ import annotations

import enum
import json
import random
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional


class DatasetError(ValueError):
    """Raised for malformed or empty norms data."""


class TaskType(str, enum.Enum):
    SI = "SI"  # attribute missing
    SG = "SG"  # vehicle missing

    @property
    def missing_slot(self) -> str:
        return "attribute" if self is TaskType.SI else "vehicle"


def _norm(text: str) -> str:
    return text.strip().lower()


@dataclass(frozen=True)
class SimileTriple:
    tenor: str
    attribute: Optional[str] = None
    vehicle: Optional[str] = None

    def __post_init__(self):
        if not self.tenor or not self.tenor.strip():
            raise ValueError("tenor must be a non-empty string")
        if self.attribute is None and self.vehicle is None:
            raise ValueError("at most one of attribute/vehicle may be missing")

    @property
    def is_complete(self) -> bool:
        return self.attribute is not None and self.vehicle is not None

    @property
    def task(self) -> Optional[TaskType]:
        """Task defined by the missing slot, or ``None`` for a complete triple."""
        if self.attribute is None:
            return TaskType.SI
        if self.vehicle is None:
            return TaskType.SG
        return None

    def slot(self, name: str) -> Optional[str]:
        return getattr(self, name)

    def __str__(self):
        return f"({self.tenor}, {self.attribute}, {self.vehicle})"


@dataclass(frozen=True)
class LabeledPair:
    """A (tenor, vehicle) pair with its annotated attributes and their frequencies."""

    tenor: str
    vehicle: str
    labels: tuple = field(default_factory=tuple)

    def __post_init__(self):
        labels = tuple((str(a), int(f)) for a, f in self.labels)
        if not labels:
            raise ValueError(f"pair ({self.tenor}, {self.vehicle}) has no labels")
        seen = set()
        for attr, freq in labels:
            if freq < 1:
                raise ValueError(f"frequency must be >= 1, got {freq} for {attr!r}")
            if attr in seen:
                raise ValueError(f"duplicate attribute {attr!r} in ({self.tenor}, {self.vehicle})")
            seen.add(attr)
        object.__setattr__(self, "labels", labels)

    @property
    def key(self) -> tuple:
        return (self.tenor, self.vehicle)

    @property
    def attributes(self) -> list:
        return [a for a, _ in self.labels]

    def si_triple(self) -> SimileTriple:
        return SimileTriple(self.tenor, None, self.vehicle)

    def sg_triples(self) -> list:
        return [SimileTriple(self.tenor, attr, None) for attr in self.attributes]

    def task_items(self, task: TaskType) -> list:
        """(incomplete triple, gold words) items this pair contributes to ``task``."""
        task = TaskType(task)
        if task is TaskType.SI:
            return [(self.si_triple(), tuple(self.attributes))]
        return [(t, (self.vehicle,)) for t in self.sg_triples()]


@dataclass(frozen=True)
class SplitDataset:
    train: tuple
    test: tuple

    def __post_init__(self):
        object.__setattr__(self, "train", tuple(self.train))
        object.__setattr__(self, "test", tuple(self.test))
        shared = {p.key for p in self.train} & {p.key for p in self.test}
        if shared:
            raise ValueError(f"train and test share pairs: {sorted(shared)[:5]}")


def iter_norm_rows(path) -> Iterator[tuple]:
    """Yield ``(line_no, tenor, attribute, vehicle, frequency)`` from a norms file."""
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            cols = line.rstrip("\r\n").split("\t")
            if len(cols) != 4:
                raise DatasetError(f"{path}:{line_no}: expected 4 tab-separated columns, got {len(cols)}")
            tenor, attr, vehicle, freq = (_norm(c) for c in cols)
            if not tenor or not attr or not vehicle:
                raise DatasetError(f"{path}:{line_no}: empty field")
            try:
                frequency = int(freq)
            except ValueError:
                raise DatasetError(f"{path}:{line_no}: frequency {freq!r} is not an integer") from None
            if frequency < 1:
                raise DatasetError(f"{path}:{line_no}: frequency must be positive, got {frequency}")
            yield line_no, tenor, attr, vehicle, frequency


def group_rows(rows: Iterable[tuple], min_frequency: int = 5) -> list:
    """Group ``(tenor, attribute, vehicle, frequency)`` rows into pairs, dropping rare attributes."""
    grouped: "OrderedDict[tuple, OrderedDict[str, int]]" = OrderedDict()
    for tenor, attr, vehicle, freq in rows:
        if freq < min_frequency:
            continue
        labels = grouped.setdefault((tenor, vehicle), OrderedDict())
        # repeated (tenor, attribute, vehicle) rows keep the highest count
        labels[attr] = max(freq, labels.get(attr, 0))
    return [LabeledPair(t, v, tuple(labels.items())) for (t, v), labels in grouped.items() if labels]


def load_norms(path, min_frequency: int = 5) -> list:
    """Read a norms file into labeled pairs.

    Attributes annotated by fewer than ``min_frequency`` people are dropped, as
    are pairs left without any attribute. The default of 5 keeps frequencies
    strictly greater than 4.
    """
    if min_frequency < 1:
        raise ValueError("min_frequency must be a positive integer")
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"norms file not found: {path}")
    rows = ((t, a, v, f) for _, t, a, v, f in iter_norm_rows(path))
    pairs = group_rows(rows, min_frequency)
    if not pairs:
        raise DatasetError(f"empty dataset: no pair in {path} survives min_frequency={min_frequency}")
    return pairs


def write_norms(pairs: Iterable[LabeledPair], path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for pair in pairs:
            for attr, freq in pair.labels:
                fh.write(f"{pair.tenor}\t{attr}\t{pair.vehicle}\t{freq}\n")


def split(pairs, seed: int = 0, test_fraction: float = 145 / 678) -> SplitDataset:
    """Seeded random partition of pairs into train and test.

    The test split gets ``round(len(pairs) * test_fraction)`` pairs, clamped so
    both sides are non-empty. Relative order of the input is kept in each side.
    """
    pairs = list(pairs)
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    if len(pairs) < 2:
        raise DatasetError("need at least 2 pairs to split")
    keys = [p.key for p in pairs]
    if len(set(keys)) != len(keys):
        raise DatasetError("duplicate (tenor, vehicle) pairs in input")
    n_test = min(max(int(round(len(pairs) * test_fraction)), 1), len(pairs) - 1)
    order = list(range(len(pairs)))
    random.Random(seed).shuffle(order)
    test_idx = set(order[:n_test])
    train = [p for i, p in enumerate(pairs) if i not in test_idx]
    test = [p for i, p in enumerate(pairs) if i in test_idx]
    return SplitDataset(train, test)


def write_split(dataset: SplitDataset, out_dir, seed: int, test_fraction: float, extra: Optional[dict] = None) -> Path:
    """Write ``train.tsv``, ``test.tsv`` and ``manifest.json`` under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_norms(dataset.train, out_dir / "train.tsv")
    write_norms(dataset.test, out_dir / "test.tsv")
    manifest = {
        "seed": seed,
        "test_fraction": test_fraction,
        "counts": {"train": len(dataset.train), "test": len(dataset.test)},
    }
    if extra:
        manifest.update(extra)
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest_path
