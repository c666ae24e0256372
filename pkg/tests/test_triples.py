import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simile_probe.triples import (
    DatasetError,
    LabeledPair,
    SimileTriple,
    SplitDataset,
    TaskType,
    group_rows,
    load_norms,
    split,
    write_norms,
    write_split,
)


def test_sample_rows_group_and_filter(data_dir):
    pairs = load_norms(data_dir / "sample_norms.tsv")
    by_key = {p.key: p for p in pairs}
    anger = by_key[("anger", "fire")]
    assert anger.labels == (("dangerous", 8), ("hot", 8), ("red", 5))
    assert ("love", "melody") not in by_key
    assert by_key[("love", "rose")].attributes == ["beautiful"]


def test_min_frequency_one_keeps_everything(data_dir):
    pairs = load_norms(data_dir / "sample_norms.tsv", min_frequency=1)
    assert sum(len(p.labels) for p in pairs) == 6
    assert ("love", "melody") in {p.key for p in pairs}


def test_malformed_row_names_line(tmp_path):
    f = tmp_path / "bad.tsv"
    f.write_text("# header\nanger\thot\tfire\t8\nlove\tbeautiful\trose\n")
    with pytest.raises(DatasetError, match=":3:"):
        load_norms(f)


def test_non_integer_frequency(tmp_path):
    f = tmp_path / "bad.tsv"
    f.write_text("anger\thot\tfire\tmany\n")
    with pytest.raises(DatasetError, match="not an integer"):
        load_norms(f)


def test_empty_result_is_an_error(tmp_path):
    f = tmp_path / "rare.tsv"
    f.write_text("love\tbeautiful\tmelody\t2\n")
    with pytest.raises(DatasetError, match="empty dataset"):
        load_norms(f)


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_norms("/nonexistent/norms.tsv")


def test_normalization_keeps_multiword(tmp_path):
    f = tmp_path / "n.tsv"
    f.write_text("  Tree Trunks \tWeak\tStraws\t6\n")
    (pair,) = load_norms(f)
    assert pair.key == ("tree trunks", "straws")


def test_triple_tasks():
    assert SimileTriple("love", None, "rose").task is TaskType.SI
    assert SimileTriple("cloud", "soft", None).task is TaskType.SG
    assert SimileTriple("love", "thorny", "rose").task is None
    with pytest.raises(ValueError):
        SimileTriple("love", None, None)
    with pytest.raises(ValueError):
        SimileTriple("  ", "a", None)


def test_pair_invariants():
    with pytest.raises(ValueError):
        LabeledPair("a", "b", ())
    with pytest.raises(ValueError):
        LabeledPair("a", "b", (("x", 0),))
    with pytest.raises(ValueError):
        LabeledPair("a", "b", (("x", 5), ("x", 6)))


def test_pair_yields_one_si_and_one_sg_per_label():
    pair = LabeledPair("anger", "fire", (("dangerous", 8), ("hot", 8), ("red", 5)))
    assert pair.task_items(TaskType.SI) == [(SimileTriple("anger", None, "fire"), ("dangerous", "hot", "red"))]
    sg = pair.task_items(TaskType.SG)
    assert [t for t, _ in sg] == [SimileTriple("anger", a, None) for a in ("dangerous", "hot", "red")]
    assert all(g == ("fire",) for _, g in sg)


def _pairs(n):
    return [LabeledPair(f"t{i}", f"v{i}", ((f"a{i}", 5),)) for i in range(n)]


def test_split_reference_sizes():
    ds = split(_pairs(678), seed=0, test_fraction=145 / 678)
    assert (len(ds.train), len(ds.test)) == (533, 145)


def test_split_deterministic_and_seed_dependent():
    pairs = _pairs(678)
    a = split(pairs, seed=0, test_fraction=145 / 678)
    b = split(pairs, seed=0, test_fraction=145 / 678)
    c = split(pairs, seed=1, test_fraction=145 / 678)
    assert a == b
    assert {p.key for p in a.test} != {p.key for p in c.test}
    assert len(c.test) == len(a.test)


def test_split_errors():
    with pytest.raises(DatasetError):
        split(_pairs(1), 0, 0.5)
    with pytest.raises(ValueError):
        split(_pairs(10), 0, 1.0)


def test_split_dataset_rejects_overlap():
    p = _pairs(2)
    with pytest.raises(ValueError):
        SplitDataset([p[0]], [p[0], p[1]])


def test_write_split_manifest(tmp_path):
    ds = split(_pairs(20), seed=3, test_fraction=0.25)
    manifest = json.loads(write_split(ds, tmp_path, 3, 0.25).read_text())
    assert manifest == {"seed": 3, "test_fraction": 0.25, "counts": {"train": 15, "test": 5}}
    assert load_norms(tmp_path / "train.tsv", 1) == list(ds.train)


@given(st.integers(2, 300), st.floats(0.01, 0.99), st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_split_sizes_within_one(n, frac, seed):
    ds = split(_pairs(n), seed, frac)
    assert abs(len(ds.test) - n * frac) <= 1
    assert len(ds.train) + len(ds.test) == n
    assert not {p.key for p in ds.train} & {p.key for p in ds.test}


rows = st.lists(
    st.tuples(st.sampled_from(["love", "anger", "time"]), st.sampled_from(["hot", "red", "soft", "big"]),
              st.sampled_from(["fire", "rose", "money"]), st.integers(1, 12)),
    min_size=1, max_size=30,
)


@given(rows, st.integers(1, 12), st.integers(1, 12))
def test_filter_monotone(rs, lo, hi):
    lo, hi = sorted((lo, hi))
    count = lambda m: sum(len(p.labels) for p in group_rows(rs, m))
    assert count(hi) <= count(lo)


@given(rows, st.integers(1, 8))
@settings(deadline=None)
def test_load_serialize_load_idempotent(tmp_path_factory, rs, m):
    pairs = group_rows(rs, m)
    if not pairs:
        return
    d = tmp_path_factory.mktemp("rt")
    write_norms(pairs, d / "a.tsv")
    once = load_norms(d / "a.tsv", m)
    write_norms(once, d / "b.tsv")
    assert load_norms(d / "b.tsv", m) == once == pairs
