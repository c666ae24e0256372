"""Input checks shared by the estimators and the CLI."""

from __future__ import annotations

from .triples import LabeledPair, SimileTriple, TaskType


def check_task(task) -> TaskType:
    try:
        return TaskType(task)
    except ValueError:
        raise ValueError(f"task must be 'SI' or 'SG', got {task!r}") from None


def check_pairs(X, name="X") -> list:
    """Accept labeled pairs; non-empty."""
    pairs = list(X)
    if not pairs:
        raise ValueError(f"{name} is empty")
    for p in pairs:
        if not isinstance(p, LabeledPair):
            raise TypeError(f"{name} must contain LabeledPair objects, got {type(p).__name__}")
    return pairs


def check_triples(X, task=None) -> list:
    """Accept SimileTriple objects or ``(tenor, attribute, vehicle)`` tuples.

    With ``task`` given every triple must be incomplete in that task's slot.
    """
    triples = []
    for item in X:
        t = item if isinstance(item, SimileTriple) else SimileTriple(*item)
        if t.task is None:
            raise ValueError(f"triple {t} is complete; nothing to predict")
        if task is not None and t.task is not TaskType(task):
            raise ValueError(f"triple {t} is a {t.task.value} input, estimator is fitted for {TaskType(task).value}")
        triples.append(t)
    return triples


def check_k(k, name="k") -> int:
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise ValueError(f"{name} must be a positive integer, got {k!r}")
    return k


def check_ks(ks) -> tuple:
    ks = tuple(check_k(k, "ks entry") for k in ks)
    if list(ks) != sorted(set(ks)):
        raise ValueError(f"ks must be strictly ascending, got {ks}")
    return ks
