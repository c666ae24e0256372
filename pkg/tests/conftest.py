import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"

TINY_WORDS = [
    "the", "is", "as", "very", "like", "so", "and", "are", "alike", "similar", "to", "because", "they", "both",
    "love", "rose", "cloud", "soft", "hard", "big", "red", "sweet", "cotton", "silk", "house", "large", "old",
    "good", "fire", "hot", "anger", "stood", "empty", "dog", "cat", "##s", ".", ",",
]


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def tiny_bert(tmp_path_factory):
    """A randomly initialised one-layer BERT with a word-level vocabulary, saved to disk."""
    transformers = pytest.importorskip("transformers")
    torch = pytest.importorskip("torch")
    path = tmp_path_factory.mktemp("tiny_bert")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + TINY_WORDS
    (path / "vocab.txt").write_text("\n".join(vocab) + "\n")
    tokenizer = transformers.BertTokenizerFast(vocab={w: i for i, w in enumerate(vocab)}, do_lower_case=True)
    config = transformers.BertConfig(vocab_size=len(vocab), hidden_size=16, num_hidden_layers=1,
                                     num_attention_heads=2, intermediate_size=32, max_position_embeddings=64)
    torch.manual_seed(0)
    model = transformers.BertForMaskedLM(config)
    model.save_pretrained(path)
    tokenizer.save_pretrained(path)
    return path


def pretrained_model_path():
    """Local directory of the full-size model used by the optional reproduction jobs."""
    return os.environ.get("SIMILE_PROBE_MODEL")


# -- acceptance summary -------------------------------------------------------

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        _CRITERIA[number] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number} [{status}] {title}")
