import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from simile_probe.metrics import (
    IDENTITY,
    DictSynonyms,
    EvalRecord,
    MetricError,
    WordNetSynonyms,
    common_word_report,
    evaluate,
    is_correct,
    metric_rows,
    mrr,
    p_at_k,
    r_at_k,
)
from simile_probe.triples import SimileTriple

T = SimileTriple("love", None, "rose")


def rec(preds, gold=("hot",)):
    return EvalRecord(T, gold, preds)


def test_p_at_k_examples():
    assert p_at_k([rec(["a", "b", "c"])], 3) == 1.0
    assert p_at_k([rec(["a", "b"]), rec(["a", "b"])], 2) == 0.5
    with pytest.raises(MetricError, match="record 1"):
        p_at_k([rec(["a", "b"]), rec(["a"])], 2)


def test_mrr_examples():
    assert mrr([rec(["hot", "x"]), rec(["hot"])]) == 1.0
    records = [rec(["x", "hot", "y", "z"]), rec(["x", "y", "z", "hot"])]
    assert mrr(records) == pytest.approx(0.375, abs=1e-12)
    assert mrr([rec(["x", "y"])]) == 0.0


def test_mrr_uses_best_label_rank():
    r = EvalRecord(T, ("red", "hot"), ("x", "hot", "red"))
    assert mrr([r]) == 0.5


def test_is_correct_with_fixture_synonyms(data_dir):
    syn = DictSynonyms.from_json(data_dir / "synonyms.json")
    assert is_correct("hot", ["hot"], IDENTITY)
    assert is_correct("warm", ["hot"], syn)
    assert not is_correct("cold", ["hot"], syn)
    assert not is_correct("warm", ["hot"], IDENTITY)


def test_r_at_k_examples():
    assert r_at_k([rec(["a", "b", "c", "d", "e"])], 5) == 0.0
    records = [rec(["hot", "a", "warm", "b", "c"], ("hot", "warm")), rec(["a", "b", "c", "d", "e"])]
    assert r_at_k(records, 5) == pytest.approx(0.2, abs=1e-12)


def test_common_word_report():
    records = [rec(["good", "a"]), rec(["b", "good"]), rec(["c", "d"])]
    report = common_word_report(records, ["good", "a", "zzz"], 2)
    assert report == pytest.approx({"good": 200 / 3, "a": 100 / 3, "zzz": 0.0})
    assert common_word_report(records[:2], ["good"], 2) == {"good": 100.0}


def test_duplicate_predictions_rejected():
    with pytest.raises(MetricError):
        rec(["a", "a"])


def test_evaluate_and_rows():
    records = [rec(["hot", "a", "b"])]
    values = evaluate(records, ks=(1, 3))
    assert values == {"MRR": 1.0, "R@1": 1.0, "R@3": pytest.approx(1 / 3)}
    rows = metric_rows(values, split="test")
    assert rows[1] == {"metric": "R", "k": 1, "value": 1.0, "split": "test"}


class FakeSynset:
    def __init__(self, names):
        self._names = names

    def lemma_names(self):
        return self._names


class FakeWordNet:
    table = {"hot": [FakeSynset(["hot", "Warm"]), FakeSynset(["raging", "red-hot", "hot_stuff"])]}

    def synsets(self, word):
        return self.table.get(word, [])


def test_wordnet_provider_single_words_lowercased():
    wn = WordNetSynonyms(FakeWordNet())
    assert wn.lookup("hot") == {"hot", "warm", "raging"}
    assert wn.lookup("zzz") == {"zzz"}


# -- properties ------------------------------------------------------------

VOCAB = list("abcdefghij")


@st.composite
def record_sets(draw, min_depth=5):
    n = draw(st.integers(1, 20))
    out = []
    for _ in range(n):
        preds = draw(st.permutations(VOCAB))[: draw(st.integers(min_depth, len(VOCAB)))]
        gold = draw(st.lists(st.sampled_from(VOCAB + ["zz"]), min_size=1, max_size=3, unique=True))
        out.append((list(preds), gold))
    return out


synonym_tables = st.dictionaries(st.sampled_from(VOCAB), st.lists(st.sampled_from(VOCAB), max_size=3), max_size=5)


@given(record_sets(), synonym_tables, st.integers(1, 5))
@settings(max_examples=100, deadline=None)
def test_metrics_match_naive(items, table, k):
    records = [EvalRecord(T, g, p) for p, g in items]
    syn = DictSynonyms(table)
    preds = [p for p, _ in items]
    golds = [g for _, g in items]
    assert p_at_k(records, k) == pytest.approx(oracles.p_at_k(preds, k), abs=1e-12)
    assert mrr(records, syn) == pytest.approx(oracles.mrr(preds, golds, table), abs=1e-12)
    assert r_at_k(records, k, syn) == pytest.approx(oracles.r_at_k(preds, golds, k, table), abs=1e-12)
    assert common_word_report(records, VOCAB, k) == pytest.approx(oracles.common_words(preds, VOCAB, k))


@given(record_sets(), st.integers(1, 5))
def test_p_at_k_bounds(items, k):
    records = [EvalRecord(T, g, p) for p, g in items]
    assert 1 / len(records) - 1e-12 <= p_at_k(records, k) <= 1.0


@given(record_sets(), synonym_tables, st.integers(1, 5), st.randoms(use_true_random=False))
def test_permutation_invariance(items, table, k, rnd):
    records = [EvalRecord(T, g, p) for p, g in items]
    shuffled = list(records)
    rnd.shuffle(shuffled)
    syn = DictSynonyms(table)
    assert mrr(records, syn) == pytest.approx(mrr(shuffled, syn), abs=1e-12)
    assert r_at_k(records, k, syn) == pytest.approx(r_at_k(shuffled, k, syn), abs=1e-12)


@given(record_sets(), st.integers(1, 5), st.data())
def test_correct_word_at_rank_one_never_hurts(items, k, data):
    records = [EvalRecord(T, g, p) for p, g in items]
    i = data.draw(st.integers(0, len(records) - 1))
    r = records[i]
    gold = r.gold[0]
    boosted = list(records)
    boosted[i] = EvalRecord(T, r.gold, (gold,) + tuple(w for w in r.predictions if w != gold)[: len(r.predictions) - 1])
    assert mrr(boosted) >= mrr(records)
    assert r_at_k(boosted, k) >= r_at_k(records, k) - 1e-12


@given(record_sets(), synonym_tables, st.integers(1, 5))
def test_synonyms_monotone(items, table, k):
    records = [EvalRecord(T, g, p) for p, g in items]
    assert r_at_k(records, k, IDENTITY) <= r_at_k(records, k, DictSynonyms(table))
