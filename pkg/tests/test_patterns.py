import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from simile_probe.patterns import (
    DEFAULT_REGISTRY,
    MASK,
    InapplicablePatternError,
    IncompleteInputError,
    Pattern,
    PatternClass,
    PatternError,
    applicable_patterns,
    instantiate,
    registry_from_file,
)
from simile_probe.triples import SimileTriple, TaskType

TEMPLATES = {
    "p1": "The {tenor} is as {attribute} as {vehicle}.",
    "p2": "{vehicle} is very {attribute}, so as {tenor}.",
    "p3": "{tenor} is like {vehicle}, because they are both {attribute}.",
    "p4": "The {attribute} {vehicle}.",
    "p5": "{vehicle} is very {attribute}.",
    "p6": "{vehicle} is {attribute}.",
    "p7": "The {attribute} {tenor}.",
    "p8": "{tenor} is very {attribute}.",
    "p9": "{tenor} is {attribute}.",
    "p10": "{tenor} is similar to {vehicle}.",
    "p11": "{tenor} is like {vehicle}.",
    "p12": "{tenor} and {vehicle} are alike.",
}


def test_templates_match_table():
    assert {p.id: p.template for p in DEFAULT_REGISTRY} == TEMPLATES
    assert len(DEFAULT_REGISTRY) == 12
    per_class = {c: [p.id for p in DEFAULT_REGISTRY if p.pattern_class is c] for c in PatternClass}
    assert per_class == {
        PatternClass.I: ["p1", "p2", "p3"],
        PatternClass.II: ["p4", "p5", "p6"],
        PatternClass.III: ["p7", "p8", "p9"],
        PatternClass.IV: ["p10", "p11", "p12"],
    }


def test_applicable_patterns():
    si = [p.id for p in applicable_patterns(TaskType.SI)]
    sg = [p.id for p in applicable_patterns(TaskType.SG)]
    assert si == [f"p{i}" for i in range(1, 10)]
    assert sg == [f"p{i}" for i in (1, 2, 3, 4, 5, 6, 10, 11, 12)]
    assert set(si) & set(sg) == {f"p{i}" for i in range(1, 7)}


def test_instantiate_examples():
    p = DEFAULT_REGISTRY
    assert instantiate(p["p1"], SimileTriple("love", None, "rose")).text == f"the love is as {MASK} as rose."
    q = instantiate(p["p4"], SimileTriple("cloud", "soft", None))
    assert q.text == f"the soft {MASK}."
    assert q.target_slot == "vehicle" and q.source_pattern == "p4"
    assert instantiate(p["p2"], SimileTriple("love", None, "rose")).text == f"rose is very {MASK}, so as love."
    with pytest.raises(InapplicablePatternError):
        instantiate(p["p11"], SimileTriple("time", None, "money"))
    with pytest.raises(InapplicablePatternError):
        instantiate(p["p8"], SimileTriple("cloud", "soft", None))


def test_instantiate_errors():
    with pytest.raises(IncompleteInputError):
        instantiate(DEFAULT_REGISTRY["p1"], SimileTriple("love", "thorny", "rose"))


def test_multiword_slot_verbatim():
    q = instantiate(DEFAULT_REGISTRY["p1"], SimileTriple("tree trunks", None, "straws"))
    assert q.text == f"the tree trunks is as {MASK} as straws."


def test_pattern_slot_invariant():
    with pytest.raises(PatternError):
        Pattern("p13", PatternClass.IV, "{tenor} is {attribute}.")


def test_load_custom_patterns(tmp_path):
    f = tmp_path / "extra.json"
    f.write_text(json.dumps([{"id": "p13", "class": "II", "template": "a {attribute} {vehicle}"}]))
    reg = registry_from_file(f)
    assert len(reg) == 13 and reg["p13"].pattern_class is PatternClass.II
    assert "p13" in [p.id for p in reg.applicable(TaskType.SI)]
    f.write_text(json.dumps([{"id": "p4", "class": "II", "template": "a {attribute} {vehicle}"}]))
    with pytest.raises(PatternError, match="reserved"):
        registry_from_file(f)


word = st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=8)
phrase = st.lists(word, min_size=1, max_size=2).map(" ".join)


@given(phrase, phrase, phrase, st.sampled_from(list(TaskType)))
def test_applicability_and_round_trip(tenor, attribute, vehicle, task):
    if task is TaskType.SI:
        triple, gold = SimileTriple(tenor, None, vehicle), attribute
    else:
        triple, gold = SimileTriple(tenor, attribute, None), vehicle
    usable = {p.id for p in applicable_patterns(task)}
    for p in DEFAULT_REGISTRY:
        if p.id not in usable:
            with pytest.raises(InapplicablePatternError):
                instantiate(p, triple)
            continue
        q = instantiate(p, triple)
        assert q.text.count(MASK) == 1
        full = p.fill(tenor=tenor, attribute=attribute, vehicle=vehicle)
        assert q.text.replace(MASK, gold) == full
        for slot in p.slots - {task.missing_slot}:
            assert triple.slot(slot) in q.text
