"""Hand-written simile patterns and their instantiation into masked queries."""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass
from pathlib import Path

from .triples import SimileTriple, TaskType

MASK = "MASK"
SLOTS = ("tenor", "attribute", "vehicle")
_SLOT_RE = re.compile(r"\{(tenor|attribute|vehicle)\}")


class PatternError(ValueError):
    pass


class InapplicablePatternError(PatternError):
    """The pattern has no slot for the word being predicted."""


class IncompleteInputError(PatternError):
    """The triple lacks a word the pattern needs."""


class PatternClass(str, enum.Enum):
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"

    @property
    def slots(self) -> frozenset:
        return _CLASS_SLOTS[self]


_CLASS_SLOTS = {
    PatternClass.I: frozenset(SLOTS),
    PatternClass.II: frozenset({"attribute", "vehicle"}),
    PatternClass.III: frozenset({"tenor", "attribute"}),
    PatternClass.IV: frozenset({"tenor", "vehicle"}),
}

_TASK_CLASSES = {
    TaskType.SI: frozenset({PatternClass.I, PatternClass.II, PatternClass.III}),
    TaskType.SG: frozenset({PatternClass.I, PatternClass.II, PatternClass.IV}),
}


def pattern_number(pattern_id: str) -> int:
    m = re.fullmatch(r"p(\d+)", pattern_id)
    if not m:
        raise PatternError(f"pattern id must look like 'p<N>', got {pattern_id!r}")
    return int(m.group(1))


def sort_ids(ids) -> list:
    return sorted(ids, key=pattern_number)


@dataclass(frozen=True)
class Pattern:
    id: str
    pattern_class: PatternClass
    template: str

    def __post_init__(self):
        pattern_number(self.id)
        object.__setattr__(self, "pattern_class", PatternClass(self.pattern_class))
        if self.slots != self.pattern_class.slots:
            raise PatternError(
                f"{self.id}: template slots {sorted(self.slots)} do not match class "
                f"{self.pattern_class.value} slots {sorted(self.pattern_class.slots)}"
            )

    @property
    def slots(self) -> frozenset:
        return frozenset(_SLOT_RE.findall(self.template))

    def fill(self, **words) -> str:
        """Substitute every slot from ``words`` and lowercase the template text."""
        return _SLOT_RE.sub(lambda m: words[m.group(1)], self.template.lower())


@dataclass(frozen=True)
class MaskedQuery:
    text: str
    target_slot: str
    source_pattern: str

    def __post_init__(self):
        if self.text.count(MASK) != 1:
            raise PatternError(f"query must contain exactly one {MASK}: {self.text!r}")

    def render(self, mask_literal: str) -> str:
        return self.text.replace(MASK, mask_literal)


_TABLE = [
    ("p1", "I", "The {tenor} is as {attribute} as {vehicle}."),
    ("p2", "I", "{vehicle} is very {attribute}, so as {tenor}."),
    ("p3", "I", "{tenor} is like {vehicle}, because they are both {attribute}."),
    ("p4", "II", "The {attribute} {vehicle}."),
    ("p5", "II", "{vehicle} is very {attribute}."),
    ("p6", "II", "{vehicle} is {attribute}."),
    ("p7", "III", "The {attribute} {tenor}."),
    ("p8", "III", "{tenor} is very {attribute}."),
    ("p9", "III", "{tenor} is {attribute}."),
    ("p10", "IV", "{tenor} is similar to {vehicle}."),
    ("p11", "IV", "{tenor} is like {vehicle}."),
    ("p12", "IV", "{tenor} and {vehicle} are alike."),
]

DEFAULT_PATTERNS = tuple(Pattern(pid, PatternClass(cls), tpl) for pid, cls, tpl in _TABLE)


class PatternRegistry:
    """Immutable id-to-pattern mapping; p1..p12 are reserved for the built-in set."""

    def __init__(self, patterns=DEFAULT_PATTERNS):
        by_id = {}
        for p in patterns:
            if p.id in by_id:
                raise PatternError(f"duplicate pattern id {p.id}")
            by_id[p.id] = p
        self._by_id = {pid: by_id[pid] for pid in sort_ids(by_id)}

    def __getitem__(self, pattern_id: str) -> Pattern:
        try:
            return self._by_id[pattern_id]
        except KeyError:
            raise PatternError(f"unknown pattern id {pattern_id!r}") from None

    def __contains__(self, pattern_id) -> bool:
        return pattern_id in self._by_id

    def __iter__(self):
        return iter(self._by_id.values())

    def __len__(self):
        return len(self._by_id)

    def ids(self) -> list:
        return list(self._by_id)

    def extend(self, patterns) -> "PatternRegistry":
        builtin = {p.id for p in DEFAULT_PATTERNS}
        for p in patterns:
            if p.id in builtin:
                raise PatternError(f"{p.id} is reserved for the built-in patterns")
        return PatternRegistry(list(self) + list(patterns))

    def applicable(self, task: TaskType) -> list:
        classes = _TASK_CLASSES[TaskType(task)]
        return [p for p in self if p.pattern_class in classes]


DEFAULT_REGISTRY = PatternRegistry()


def applicable_patterns(task: TaskType, registry: PatternRegistry = DEFAULT_REGISTRY) -> list:
    """Patterns usable for ``task``, ordered by id number."""
    return registry.applicable(task)


def instantiate(pattern: Pattern, triple: SimileTriple) -> MaskedQuery:
    """Build the masked sentence for ``triple`` from ``pattern``.

    >>> instantiate(DEFAULT_REGISTRY["p1"], SimileTriple("love", None, "rose")).text
    'the love is as MASK as rose.'
    """
    task = triple.task
    if task is None:
        raise IncompleteInputError(f"triple {triple} has no missing slot to predict")
    target = task.missing_slot
    if target not in pattern.slots:
        raise InapplicablePatternError(f"{pattern.id} has no {target} slot and cannot serve {task.value}")
    words = {}
    for slot in pattern.slots:
        if slot == target:
            words[slot] = MASK
            continue
        value = triple.slot(slot)
        if value is None:
            raise IncompleteInputError(f"{pattern.id} needs a {slot} but triple {triple} has none")
        words[slot] = value.strip().lower()
    return MaskedQuery(pattern.fill(**words), target, pattern.id)


def load_patterns(path) -> list:
    """Read patterns from a JSON list of ``{id, class, template}`` objects."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        data = data.get("patterns", [])
    try:
        return [Pattern(item["id"], PatternClass(item["class"]), item["template"]) for item in data]
    except (KeyError, TypeError, ValueError) as exc:
        raise PatternError(f"malformed pattern file {path}: {exc}") from exc


def registry_from_file(path) -> PatternRegistry:
    return DEFAULT_REGISTRY.extend(load_patterns(path))
