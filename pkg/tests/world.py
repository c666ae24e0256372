"""A small on-disk world (norms split, vocabularies, mock model, embeddings) for end-to-end runs."""

import json
import random

from simile_probe.patterns import DEFAULT_REGISTRY, instantiate
from simile_probe.triples import LabeledPair, TaskType, write_norms

ATTRS = [f"attr{i:02d}" for i in range(30)]
VEHICLES = [f"veh{i:02d}" for i in range(30)]

# p2 and p10 put the gold word near the top, every other pattern is noise
GOOD = {TaskType.SI: "p2", TaskType.SG: "p10"}


def pairs(n=12):
    out = []
    for i in range(n):
        labels = ((ATTRS[i], 6), (ATTRS[(i + 7) % 30], 5))
        out.append(LabeledPair(f"tenor{i:02d}", VEHICLES[i], labels))
    return out


def mock_queries(all_pairs, seed=0):
    rng = random.Random(seed)
    queries = {}
    for pair in all_pairs:
        for task, vocab in ((TaskType.SI, ATTRS), (TaskType.SG, VEHICLES)):
            for triple, gold in pair.task_items(task):
                for p in DEFAULT_REGISTRY.applicable(task):
                    row = {w: round(rng.uniform(-2, 2), 3) for w in vocab}
                    if p.id == GOOD[task]:
                        for g in gold:
                            row[g] = 6.0
                    queries[instantiate(p, triple).text] = row
    return queries


def build(root, n=12, filter_enabled=False):
    root.mkdir(parents=True, exist_ok=True)
    every = pairs(n)
    write_norms(every[: n - 4], root / "train.tsv")
    write_norms(every[n - 4:], root / "test.tsv")
    (root / "vocab_si.txt").write_text("\n".join(ATTRS) + "\n")
    (root / "vocab_sg.txt").write_text("\n".join(VEHICLES) + "\n")
    (root / "mock.json").write_text(json.dumps({"default_logit": -5.0, "queries": mock_queries(every)}))
    emb = [f"tenor{i:02d} 1 0" for i in range(n)] + [f"veh{i:02d} {i / 30:.4f} 1" for i in range(30)]
    (root / "emb.txt").write_text("\n".join(emb) + "\n")
    config = {
        "model": {"backend": "mock", "identifier": "mock.json"},
        "vocab": {"SI": "vocab_si.txt", "SG": "vocab_sg.txt"},
        "patterns": "search",
        "data": {"train": "train.tsv", "test": "test.tsv"},
        "ks": [1, 5, 10],
        "filter": {"threshold": 0.48, "embedding_path": "emb.txt", "enabled": filter_enabled},
        "probe_words": ["attr00", "attr07", "zzz"],
        "output_dir": "runs",
    }
    (root / "config.json").write_text(json.dumps(config, indent=2))
    return root / "config.json"
