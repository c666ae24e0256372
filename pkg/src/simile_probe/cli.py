"""Command-line entry point: ``simile-probe <command> ...``.

Exit codes: 0 success, 1 computation error, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__, metrics
from .ant import AntDataset, AntError, TrainingManifest, build_ant_dataset, finetune, read_conllu, spacy_parser
from .completion import CompletionError, EmbeddingTable, pattern_search
from .estimator import SimileCompleter, VehicleFilter
from .patterns import PatternError
from .scorer import ModelRef, ScoringError, load_mock, load_pretrained, load_vocabulary
from .triples import DatasetError, SimileTriple, TaskType, load_norms, split, write_split

logger = logging.getLogger("simile_probe")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    model: dict = field(default_factory=lambda: {"backend": "pretrained", "identifier": "bert-large-uncased",
                                                 "device": "cpu"})
    vocab: dict = field(default_factory=dict)
    patterns: object = "search"
    data: dict = field(default_factory=dict)
    ks: list = field(default_factory=lambda: list(metrics.DEFAULT_KS))
    k: int = 10
    tasks: list = field(default_factory=lambda: ["SI", "SG"])
    objective: str = "MRR"
    filter: dict = field(default_factory=lambda: {"threshold": 0.48, "embedding_path": None, "enabled": False})
    synonyms: dict = field(default_factory=lambda: {"kind": "identity"})
    mrr_synonyms: bool = True
    diversity_ks: list = field(default_factory=lambda: [5, 10, 15, 25])
    common_word_ks: list = field(default_factory=lambda: [15, 25])
    probe_words: object = field(default_factory=lambda: list(metrics.DEFAULT_PROBE_WORDS))
    output_dir: str = "runs"
    seed: int = 0
    workers: int = 1

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        text = path.read_text(encoding="utf-8")
        try:
            if path.suffix == ".toml":
                data = tomllib.loads(text)
            else:
                data = json.loads(text)
        except ValueError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        cfg._base = path.parent
        return cfg

    def path(self, value) -> Optional[Path]:
        if value is None:
            return None
        p = Path(value)
        if not p.is_absolute():
            p = getattr(self, "_base", Path(".")) / p
        return p

    def require(self, value, what) -> Path:
        p = self.path(value)
        if p is None:
            raise ConfigError(f"config is missing {what}")
        if not p.exists():
            raise ConfigError(f"{what} does not exist: {p}")
        return p

    def validate(self) -> None:
        if list(self.ks) != sorted(set(self.ks)) or any(k < 1 for k in self.ks):
            raise ConfigError(f"ks must be positive and strictly ascending, got {self.ks}")
        for t in self.tasks:
            if t not in ("SI", "SG"):
                raise ConfigError(f"unknown task {t!r}")
        if self.model.get("backend") not in ("mock", "pretrained"):
            raise ConfigError(f"model.backend must be 'mock' or 'pretrained', got {self.model.get('backend')!r}")
        if self.model.get("backend") == "mock":
            self.require(self.model.get("identifier"), "model.identifier")
        for t in self.tasks:
            self.require(self.vocab.get(t), f"vocab.{t}")
        if self.filter.get("enabled"):
            self.require(self.filter.get("embedding_path"), "filter.embedding_path")
        if self.synonyms.get("kind") == "fixture":
            self.require(self.synonyms.get("path"), "synonyms.path")

    def resolved(self) -> dict:
        return asdict(self)

    def patterns_for(self, task: str):
        p = self.patterns
        if isinstance(p, dict):
            p = p.get(task, "search")
        return p


def _model(cfg: RunConfig) -> ModelRef:
    m = cfg.model
    if m["backend"] == "mock":
        return load_mock(cfg.path(m["identifier"]))
    ident = m.get("identifier", "bert-large-uncased")
    local = cfg.path(ident)
    return load_pretrained(str(local) if local.exists() else ident, m.get("device", "cpu"))


def _synonyms(cfg: RunConfig) -> metrics.SynonymProvider:
    kind = cfg.synonyms.get("kind", "identity")
    if kind == "identity":
        return metrics.IDENTITY
    if kind == "fixture":
        return metrics.DictSynonyms.from_json(cfg.path(cfg.synonyms["path"]))
    if kind == "wordnet":
        return metrics.WordNetSynonyms()
    raise ConfigError(f"unknown synonyms.kind {kind!r}")


def _vehicle_filter(cfg: RunConfig, train) -> Optional[VehicleFilter]:
    f = cfg.filter
    if not f.get("enabled"):
        return None
    table = EmbeddingTable.load(cfg.path(f["embedding_path"]))
    vf = VehicleFilter(table, f.get("threshold"))
    return vf.fit(train)


def _probe_words(cfg: RunConfig) -> list:
    if isinstance(cfg.probe_words, str):
        return metrics.load_probe_words(cfg.require(cfg.probe_words, "probe_words"))
    return [w.lower() for w in cfg.probe_words]


def _pairs(cfg: RunConfig, which: str):
    path = cfg.require(cfg.data.get(which), f"data.{which}")
    return load_norms(path, cfg.data.get("min_frequency", 5))


def _run_dir(cfg: RunConfig, command: str, outdir: Optional[str] = None) -> Path:
    base = Path(outdir) if outdir else cfg.path(cfg.output_dir)
    stamp = time.strftime("%Y%m%d-%H%M%S")
    run = base / f"{command}-{stamp}"
    n = 1
    while run.exists():
        n += 1
        run = base / f"{command}-{stamp}-{n}"
    run.mkdir(parents=True)
    return run


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _completer(cfg: RunConfig, model, task: str, train=None) -> SimileCompleter:
    vocab = load_vocabulary(cfg.require(cfg.vocab.get(task), f"vocab.{task}"), task)
    patterns = cfg.patterns_for(task)
    derive = task == "SG" and cfg.filter.get("enabled") and cfg.filter.get("threshold") is None
    if (patterns == "search" or derive) and train is None:
        train = _pairs(cfg, "train")
    vf = _vehicle_filter(cfg, train) if task == "SG" else None
    est = SimileCompleter(model=model, task=task, vocab=vocab, patterns=patterns, k=cfg.k,
                          objective=cfg.objective, ks=tuple(cfg.ks), synonyms=_synonyms(cfg),
                          mrr_synonyms=cfg.mrr_synonyms, vehicle_filter=vf, workers=cfg.workers)
    return est.fit(train)


# -- commands ---------------------------------------------------------------


def cmd_split(args) -> int:
    pairs = load_norms(_existing(args.norms), args.min_frequency)
    ds = split(pairs, seed=args.seed, test_fraction=args.test_fraction)
    write_split(ds, args.out, args.seed, args.test_fraction,
                extra={"source": str(args.norms), "min_frequency": args.min_frequency})
    print(f"train {len(ds.train)}  test {len(ds.test)}  -> {args.out}")
    return EXIT_OK


def cmd_build_ant_dataset(args) -> int:
    corpus_path = _existing(args.corpus)
    if args.parser == "conllu" or corpus_path.suffix == ".conllu":
        corpus, parser = read_conllu(corpus_path), None
    else:
        parser = spacy_parser(args.spacy_model)
        corpus = (line.strip() for line in corpus_path.open(encoding="utf-8") if line.strip())

    def progress(items):
        for i, item in enumerate(items, start=1):
            if i % args.progress_every == 0:
                print(f"processed {i} sentences", file=sys.stderr)
            yield item

    dataset = build_ant_dataset(progress(corpus), parser, cap=args.cap, noun_ratio=args.noun_ratio)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    dataset.to_jsonl(out)
    stats = dataset.stats()
    stats["config"] = {"corpus": str(corpus_path), "cap": args.cap, "noun_ratio": args.noun_ratio}
    _write_json(out.with_suffix(".stats.json"), stats)
    out.with_suffix(".skips.txt").write_text(dataset.skipped.to_text(), encoding="utf-8")
    print(f"{len(dataset)} examples ({stats['pos']['noun']} noun, {stats['pos']['adjective']} adjective) -> {out}")
    return EXIT_OK


def cmd_finetune(args) -> int:
    manifest = TrainingManifest.from_json(_existing(args.manifest))
    if args.output_dir:
        manifest.output_dir = args.output_dir
    ref = finetune(manifest)
    print(f"fine-tuned model written to {ref.identifier}")
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = _config(args)
    if (args.attribute is None) == (args.vehicle is None):
        raise ConfigError("give exactly one of --attribute/--vehicle")
    triple = SimileTriple(args.tenor.lower(), _opt(args.attribute), _opt(args.vehicle))
    task = triple.task.value
    cfg.tasks = [task]
    cfg.validate()
    if args.patterns:
        cfg.patterns = args.patterns.split(",")
    est = _completer(cfg, _model(cfg), task)
    est.set_params(k=args.k or cfg.k)
    print(f"{task} {triple}  patterns {{{', '.join(est.pattern_set_)}}}")
    for rank, (word, s) in enumerate(est.predict_scores([triple])[0], start=1):
        print(f"{rank:>3}  {word:<20} {s:.4f}")
    return EXIT_OK


def cmd_pattern_search(args) -> int:
    cfg = _config(args)
    cfg.validate()
    run = _run_dir(cfg, "pattern-search", args.outdir)
    model = _model(cfg)
    train = _pairs(cfg, "train")
    out = {}
    for task in cfg.tasks:
        vocab = load_vocabulary(cfg.path(cfg.vocab[task]), task)
        report = pattern_search(model, train, TaskType(task), vocab, cfg.objective, ks=tuple(cfg.ks),
                                synonyms=_synonyms(cfg), mrr_synonyms=cfg.mrr_synonyms,
                                workers=cfg.workers, split="train")
        report.to_json(run / f"search_{task}.json", config=cfg.resolved(), model=model.to_dict())
        table = report.format_table(args.top)
        (run / f"search_{task}.txt").write_text(table, encoding="utf-8")
        print(table)
        out[task] = list(report.best)
    _write_json(run / "config.json", {"config": cfg.resolved(), "best": out})
    print(f"results in {run}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    cfg.validate()
    run = _run_dir(cfg, "evaluate", args.outdir)
    model = _model(cfg)
    test = _pairs(cfg, "test")
    train = None
    rows, table = [], []
    for task in cfg.tasks:
        if cfg.patterns_for(task) == "search" or cfg.filter.get("enabled"):
            train = train or _pairs(cfg, "train")
        est = _completer(cfg, model, task, train)
        values = est.evaluate(test)
        context = {"task": task, "split": "test", "model": model.identifier,
                   "pattern_set": list(est.pattern_set_), "mrr_synonyms": cfg.mrr_synonyms,
                   "synonyms": _synonyms(cfg).name}
        rows.extend(metrics.metric_rows(values, **context))
        table.append({"task": task, "pattern_set": " ".join(est.pattern_set_), **values})
    _write_json(run / "metrics.json", {"config": cfg.resolved(), "rows": rows})
    columns = ["task", "pattern_set", "MRR"] + [f"R@{k}" for k in cfg.ks]
    metrics.write_table_csv(run / "metrics.csv", table, columns)
    print("  ".join(columns))
    for row in table:
        print("  ".join([row["task"], "{" + row["pattern_set"] + "}"] + [f"{row[c]:.3f}" for c in columns[2:]]))
    print(f"results in {run}")
    return EXIT_OK


def cmd_diversity_report(args) -> int:
    cfg = _config(args)
    cfg.validate()
    run = _run_dir(cfg, "diversity-report", args.outdir)
    model = _model(cfg)
    test = _pairs(cfg, "test")
    probe = _probe_words(cfg)
    depth = max(list(cfg.diversity_ks) + list(cfg.common_word_ks))
    div_rows, word_rows = [], []
    for task in cfg.tasks:
        patterns = cfg.patterns_for(task)
        train = _pairs(cfg, "train") if patterns == "search" else None
        est = _completer(cfg, model, task, train)
        records = est.records(test, depth=depth)
        for k in cfg.diversity_ks:
            div_rows.append({"task": task, "k": k, "p@k": metrics.p_at_k(records, k),
                             "pattern_set": " ".join(est.pattern_set_)})
        for k in cfg.common_word_ks:
            for word, pct in metrics.common_word_report(records, probe, k).items():
                word_rows.append({"task": task, "k": k, "word": word, "percentage": pct})
    _write_json(run / "diversity.json", {"config": cfg.resolved(), "model": model.identifier,
                                         "p_at_k": div_rows, "common_words": word_rows})
    metrics.write_table_csv(run / "diversity.csv", div_rows, ["task", "k", "p@k", "pattern_set"])
    metrics.write_table_csv(run / "common_words.csv", word_rows, ["task", "k", "word", "percentage"])
    for row in div_rows:
        print(f"{row['task']}  p@{row['k']:<3} {row['p@k']:.3f}")
    for row in word_rows:
        print(f"{row['task']}  top-{row['k']:<3} {row['word']:<12} {row['percentage']:.2f}%")
    print(f"results in {run}")
    return EXIT_OK


# -- plumbing ---------------------------------------------------------------


def _opt(value):
    return value.lower() if value else None


def _existing(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"path does not exist: {p}")
    return p


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if getattr(args, "model", None):
        ident = Path(args.model)
        cfg.model = {**cfg.model, "identifier": str(ident.resolve()) if ident.exists() else args.model}
    if getattr(args, "backend", None):
        cfg.model = {**cfg.model, "backend": args.backend}
    if getattr(args, "device", None):
        cfg.model = {**cfg.model, "device": args.device}
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "workers", None):
        cfg.workers = args.workers
    if getattr(args, "task", None):
        cfg.tasks = [args.task]
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simile-probe", description="Simile triple completion with masked LMs.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def run_opts(p, task=True):
        p.add_argument("--config", help="JSON or TOML run configuration")
        p.add_argument("--model", help="model identifier or mock fixture path")
        p.add_argument("--backend", choices=["mock", "pretrained"])
        p.add_argument("--device")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--outdir", help="parent directory for run outputs")
        if task:
            p.add_argument("--task", choices=["SI", "SG"])

    p = sub.add_parser("split", help="filter a norms file and split it into train/test")
    p.add_argument("norms")
    p.add_argument("--out", required=True)
    p.add_argument("--min-frequency", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-fraction", type=float, default=145 / 678)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("build-ant-dataset", help="build the adjective-noun masked training set")
    p.add_argument("corpus", help="CoNLL-U file, or plain text with one sentence per line")
    p.add_argument("--output", required=True)
    p.add_argument("--cap", type=int, default=5)
    p.add_argument("--noun-ratio", type=float, default=68 / 98)
    p.add_argument("--parser", choices=["conllu", "spacy"], default="conllu")
    p.add_argument("--spacy-model", default="en_core_web_sm")
    p.add_argument("--progress-every", type=int, default=10000)
    p.set_defaults(func=cmd_build_ant_dataset)

    p = sub.add_parser("finetune", help="run adjective-noun mask training from a manifest")
    p.add_argument("manifest")
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("predict", help="complete one triple")
    run_opts(p, task=False)
    p.add_argument("--tenor", required=True)
    p.add_argument("--attribute")
    p.add_argument("--vehicle")
    p.add_argument("-k", type=int)
    p.add_argument("--patterns", help="comma-separated pattern ids, overrides the config")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("pattern-search", help="rank every pattern subset on the train split")
    run_opts(p)
    p.add_argument("--top", type=int, default=25)
    p.set_defaults(func=cmd_pattern_search)

    p = sub.add_parser("evaluate", help="MRR and R@K on the test split")
    run_opts(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("diversity-report", help="p@K and common-word percentages on the test split")
    run_opts(p)
    p.set_defaults(func=cmd_diversity_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, AntError, CompletionError, PatternError, ScoringError, metrics.MetricError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
