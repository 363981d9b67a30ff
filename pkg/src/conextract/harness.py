"""Experiment configuration, orchestration (prompt -> generate -> extract -> score) and reports."""

from __future__ import annotations

import copy
import csv
import io
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .baselines import DEFAULT_TOP_N, IdfTable, first_phrases_extract, tfidf_extract
from .corpus import DatasetSplit, Document, Entry, load_split
from .extraction import ExtractionResult, extract
from .fewshot import DEFAULT_EMBEDDING_MODEL, select_closest, select_fixed, select_random
from .gateway import Gateway, GenerationRequest, OpenAICompatibleBackend, make_mock_backend
from .metrics import DEFAULT_K, DocScore, EvalReport, aggregate, score_document
from .prompts import build_prompt, get_template

log = logging.getLogger(__name__)

METHODS = ("llm", "tfidf", "firstphrases")
BACKEND_KINDS = ("openai", "echo-gold", "noisy-gold", "replay")


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 1)."""


class RunError(RuntimeError):
    """A document failed and failures are not being skipped (CLI exit code 2)."""

    def __init__(self, doc_id: str, cause: BaseException) -> None:
        super().__init__(f"document {doc_id!r} failed: {cause}")
        self.doc_id = doc_id


@dataclass
class DatasetConfig:
    test_path: str = ""
    train_path: str | None = None
    field_map: Any = None
    limit: int | None = None


@dataclass
class BackendConfig:
    base_url: str | None = None
    api_key_env: str = "OPENAI_API_KEY"
    timeout_s: float = 60.0
    max_concurrency: int = 4
    fixture: str | None = None


@dataclass
class LLMConfig:
    model_id: str = "mock"
    backend: str = "openai"
    template_name: str = "ZS-Keyphrases"
    search_term: str | None = None
    fs_strategy: str | None = None
    fs_n: int | None = None
    seed: int | None = None
    max_new_tokens: int = 512
    embedding_model_id: str = DEFAULT_EMBEDDING_MODEL
    confidence: str = "geometric_mean"
    case_sensitive: bool = False


@dataclass
class BaselineConfig:
    top_n: int = DEFAULT_TOP_N
    idf_path: str | None = None


@dataclass
class EvalConfig:
    k_values: list[int] = field(default_factory=lambda: list(DEFAULT_K))
    recall_denominator: str = "formula"


@dataclass
class IOConfig:
    cache_path: str | None = None
    output_dir: str = "runs/default"


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    method: str = "llm"
    llm: LLMConfig = field(default_factory=LLMConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    io: IOConfig = field(default_factory=IOConfig)
    concurrency: int = 4
    skip_failures: bool = False

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        return _build(cls, data, "config")

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> "ExperimentConfig":
        if not self.dataset.test_path:
            raise ConfigError("dataset.test_path is required")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.concurrency < 1:
            raise ConfigError("concurrency must be >= 1")
        if not self.eval.k_values or any(k < 1 for k in self.eval.k_values):
            raise ConfigError("eval.k_values must be a non-empty list of positive integers")
        if self.eval.recall_denominator not in ("formula", "gold"):
            raise ConfigError("eval.recall_denominator must be 'formula' or 'gold'")
        if self.method == "tfidf" and not (self.dataset.train_path or self.baseline.idf_path):
            raise ConfigError("tfidf needs dataset.train_path or baseline.idf_path")
        if self.method == "llm":
            self._validate_llm()
        return self

    def _validate_llm(self) -> None:
        llm = self.llm
        if llm.backend not in BACKEND_KINDS:
            raise ConfigError(f"llm.backend must be one of {BACKEND_KINDS}, got {llm.backend!r}")
        if llm.confidence not in ("geometric_mean", "product"):
            raise ConfigError("llm.confidence must be 'geometric_mean' or 'product'")
        try:
            template = get_template(llm.template_name, llm.search_term, llm.fs_n)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if template.is_few_shot:
            if llm.fs_strategy is not None and llm.fs_strategy != template.fs_strategy:
                raise ConfigError(f"{llm.template_name} implies fs_strategy={template.fs_strategy!r}")
            if not self.dataset.train_path:
                raise ConfigError("few-shot templates need dataset.train_path")
            if template.fs_strategy == "random" and llm.seed is None:
                raise ConfigError("FS-Random needs llm.seed")
        elif llm.fs_strategy is not None or llm.fs_n is not None:
            raise ConfigError("fs_strategy/fs_n are only valid with FS templates")
        if llm.backend == "openai" and not self.backend.base_url:
            raise ConfigError("backend.base_url is required for the openai backend")


def _build(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a JSON object")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(sorted(unknown))}")
    kwargs = {}
    for name, value in data.items():
        default = getattr(cls(), name) if name in known else None
        if hasattr(default, "__dataclass_fields__"):
            kwargs[name] = _build(type(default), value, f"{where}.{name}")
        else:
            kwargs[name] = value
    return cls(**kwargs)


def apply_overrides(config: ExperimentConfig, overrides: dict[str, Any]) -> ExperimentConfig:
    """Return a copy with dotted-path overrides (``"llm.model_id": ...``) applied; None values are skipped."""
    config = copy.deepcopy(config)
    for path, value in overrides.items():
        if value is None:
            continue
        *parents, leaf = path.split(".")
        target: Any = config
        for part in parents:
            target = getattr(target, part)
        if not hasattr(target, leaf):
            raise ConfigError(f"unknown config key {path!r}")
        setattr(target, leaf, value)
    return config


# ---------------------------------------------------------------- orchestration


def build_backend(config: ExperimentConfig):
    kind = config.llm.backend
    bcfg = config.backend
    if kind == "openai":
        return OpenAICompatibleBackend.from_env(bcfg.base_url or "", bcfg.api_key_env, timeout_s=bcfg.timeout_s)
    if kind == "replay":
        fixture = bcfg.fixture or config.io.cache_path
        if not fixture:
            raise ConfigError("replay backend needs backend.fixture or io.cache_path")
        return make_mock_backend("replay", fixture)
    return make_mock_backend(kind, bcfg.fixture or config.dataset.test_path, field_map=config.dataset.field_map)


def build_gateway(config: ExperimentConfig) -> Gateway:
    return Gateway.from_paths(build_backend(config), config.io.cache_path, config.backend.max_concurrency)


@dataclass
class _DocOutcome:
    doc_id: str
    result: ExtractionResult | None = None
    cached: bool | None = None
    error: str | None = None


def _load(config: ExperimentConfig) -> tuple[DatasetSplit, DatasetSplit | None]:
    dcfg = config.dataset
    test = load_split(dcfg.test_path, field_map=dcfg.field_map)
    if dcfg.limit is not None:
        test = test.head(dcfg.limit)
    train = load_split(dcfg.train_path, field_map=dcfg.field_map) if dcfg.train_path else None
    return test, train


class _LLMRunner:
    def __init__(self, config: ExperimentConfig, gateway: Gateway, test: DatasetSplit, train: DatasetSplit | None):
        llm = config.llm
        self.config = config
        self.gateway = gateway
        self.train = train
        self.template = get_template(llm.template_name, llm.search_term, llm.fs_n)
        self.strategy = self.template.fs_strategy
        self.fixed: list[Entry] | None = None
        self.train_vectors = None
        self.query_vectors: dict[str, Any] = {}
        if self.strategy == "fixed":
            self.fixed = select_fixed(train, self.template.fs_n)  # type: ignore[arg-type]
        elif self.strategy == "closest":
            assert train is not None
            model = llm.embedding_model_id
            vecs = gateway.embed([doc.text for doc, _ in train.entries], model)
            self.train_vectors = list(zip(train.entries, vecs))
            test_docs = test.documents()
            for doc, vec in zip(test_docs, gateway.embed([d.text for d in test_docs], model)):
                self.query_vectors[doc.id] = vec

    def examples_for(self, doc: Document) -> list[Entry]:
        n = self.template.fs_n
        if self.strategy == "fixed":
            return list(self.fixed or [])
        if self.strategy == "random":
            return select_random(self.train, n, self.config.llm.seed, doc.id)  # type: ignore[arg-type]
        if self.strategy == "closest":
            return select_closest(self.train_vectors, self.query_vectors[doc.id], n)  # type: ignore[arg-type]
        return []

    def __call__(self, doc: Document) -> tuple[ExtractionResult, bool]:
        llm = self.config.llm
        prompt = build_prompt(self.template, doc, self.examples_for(doc))
        req = GenerationRequest(llm.model_id, prompt.messages, max_new_tokens=llm.max_new_tokens)
        gen = self.gateway.complete(req)
        result = extract(doc, gen, case_sensitive=llm.case_sensitive, aggregate=llm.confidence)
        return result, gen.cached


def _baseline_runner(config: ExperimentConfig, train: DatasetSplit | None):
    top_n = config.baseline.top_n
    if config.method == "firstphrases":
        return lambda doc: (first_phrases_extract(doc, top_n), None)
    if config.baseline.idf_path:
        idf = IdfTable.load(config.baseline.idf_path)
    else:
        idf = IdfTable.from_split(train)  # type: ignore[arg-type]
    return lambda doc: (tfidf_extract(doc, idf, top_n), None)


def extract_split(config: ExperimentConfig, gateway: Gateway | None = None) -> list[ExtractionResult]:
    """Extractions for every test document, without scoring or writing artifacts."""
    config.validate()
    test, train = _load(config)
    if config.method == "llm":
        worker = _LLMRunner(config, gateway or build_gateway(config), test, train)
    else:
        worker = _baseline_runner(config, train)
    with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
        return [result for result, _ in pool.map(worker, test.documents())]


def model_label(config: ExperimentConfig) -> str:
    return config.llm.model_id if config.method == "llm" else config.method


def prompt_label(config: ExperimentConfig) -> str:
    if config.method != "llm":
        return "-"
    llm = config.llm
    return get_template(llm.template_name, llm.search_term, llm.fs_n).display_name


def run_experiment(config: ExperimentConfig, gateway: Gateway | None = None) -> EvalReport:
    """Run one configuration end to end and write its artifacts under ``io.output_dir``.

    Writes ``manifest.json`` first, then ``extractions.jsonl`` and the report
    as ``report.json``, ``report.csv`` and ``report.txt``.
    """
    config.validate()
    test, train = _load(config)
    out_dir = Path(config.io.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if config.method == "llm":
        gateway = gateway or build_gateway(config)
        hits0, misses0, calls0 = gateway.cache.hits, gateway.cache.misses, gateway.backend_calls
        worker = _LLMRunner(config, gateway, test, train)
    else:
        worker = _baseline_runner(config, train)

    def process(entry: Entry) -> _DocOutcome:
        doc = entry[0]
        try:
            result, cached = worker(doc)
        except Exception as exc:
            if not config.skip_failures:
                raise RunError(doc.id, exc) from exc
            log.warning("skipping %s: %s", doc.id, exc)
            return _DocOutcome(doc.id, error=f"{type(exc).__name__}: {exc}")
        return _DocOutcome(doc.id, result=result, cached=cached)

    with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
        outcomes = list(pool.map(process, test.entries))  # dataset order, whatever finishes first

    per_doc: list[DocScore] = []
    for (doc, gold), outcome in zip(test.entries, outcomes):
        if outcome.result is not None:
            per_doc.append(
                score_document(
                    doc.id,
                    outcome.result.ranked_phrases(),
                    gold.keyphrases,
                    config.eval.k_values,
                    config.eval.recall_denominator,
                )
            )
    if not per_doc:
        raise RunError("*", RuntimeError("every document failed"))
    report = aggregate(per_doc, test.name, model_label(config), prompt_label(config))

    artifacts = {name: str(out_dir / name) for name in ("extractions.jsonl", "report.json", "report.csv", "report.txt")}
    manifest: dict[str, Any] = {
        "tool": "conextract",
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "config": config.to_dict(),
        "artifacts": artifacts,
        "n_documents": len(test),
        "n_scored": len(per_doc),
        "failures": [{"doc_id": o.doc_id, "error": o.error} for o in outcomes if o.error],
    }
    if config.method == "llm":
        assert gateway is not None
        hits = gateway.cache.hits - hits0
        lookups = hits + gateway.cache.misses - misses0
        manifest["cache_path"] = config.io.cache_path
        manifest["cache_hit_ratio"] = hits / lookups if lookups else 0.0
        manifest["backend_calls"] = gateway.backend_calls - calls0
        manifest["backend_warnings"] = sorted(set(gateway.warnings))
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")

    with (out_dir / "extractions.jsonl").open("w", encoding="utf-8") as fh:
        for (doc, gold), outcome in zip(test.entries, outcomes):
            row: dict[str, Any] = {"doc_id": doc.id, "gold": list(gold.keyphrases)}
            if outcome.result is not None:
                row.update(outcome.result.to_dict())
                row["cached"] = outcome.cached
            else:
                row["error"] = outcome.error
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")
    for fmt, name in (("json", "report.json"), ("csv", "report.csv"), ("table", "report.txt")):
        (out_dir / name).write_bytes(render_report(report, fmt))
    return report


def read_manifest(output_dir: str | Path) -> dict:
    return json.loads((Path(output_dir) / "manifest.json").read_text(encoding="utf-8"))


# ---------------------------------------------------------------- reports


def _r4(x: float) -> float:
    return round(float(x), 4)


def _columns(ks: Sequence[int]) -> list[str]:
    return ["P", "R", "F1", *[f"F1@{k}" for k in ks], "N_EX"]


def _metric_values(report: EvalReport) -> list[float]:
    return [report.precision, report.recall, report.f1, *[report.f1_at[k] for k in sorted(report.f1_at)], report.n_ex]


def report_to_dict(report: EvalReport) -> dict:
    ks = sorted(report.f1_at)
    data: dict[str, Any] = {"dataset": report.split_name, "model": report.model_id, "prompt": report.template_name}
    data.update({col: _r4(v) for col, v in zip(_columns(ks), _metric_values(report))})
    data["per_doc"] = [
        {
            "doc_id": d.doc_id,
            "P": _r4(d.p),
            "R": _r4(d.r),
            "F1": _r4(d.f1),
            **{f"P@{k}": _r4(d.p_at[k]) for k in ks},
            **{f"R@{k}": _r4(d.r_at[k]) for k in ks},
            **{f"F1@{k}": _r4(d.f1_at[k]) for k in ks},
            "n_predicted": d.n_predicted,
        }
        for d in report.per_doc
    ]
    return data


def report_from_dict(data: dict) -> EvalReport:
    ks = sorted(int(key[3:]) for key in data if key.startswith("F1@"))
    per_doc = tuple(
        DocScore(
            doc_id=d["doc_id"],
            p=d["P"],
            r=d["R"],
            f1=d["F1"],
            p_at={k: d[f"P@{k}"] for k in ks},
            r_at={k: d[f"R@{k}"] for k in ks},
            f1_at={k: d[f"F1@{k}"] for k in ks},
            n_predicted=d["n_predicted"],
        )
        for d in data.get("per_doc", [])
    )
    return EvalReport(
        split_name=data["dataset"],
        model_id=data["model"],
        template_name=data["prompt"],
        precision=data["P"],
        recall=data["R"],
        f1=data["F1"],
        f1_at={k: data[f"F1@{k}"] for k in ks},
        n_ex=data["N_EX"],
        per_doc=per_doc,
    )


def _rows_csv(header: list[str], rows: list[list[str]]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue().encode("utf-8")


def _rows_table(header: list[str], rows: list[list[str]]) -> bytes:
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]
    lines = []
    for i, row in enumerate([header, *rows]):
        cells = [c.ljust(w) if j < 3 else c.rjust(w) for j, (c, w) in enumerate(zip(row, widths))]
        lines.append("  ".join(cells).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return ("\n".join(lines) + "\n").encode("utf-8")


def _report_row(report: EvalReport) -> list[str]:
    return [report.split_name, report.model_id, report.template_name, *[f"{v:.4f}" for v in _metric_values(report)]]


def render_report(report: EvalReport, fmt: str = "table") -> bytes:
    """Deterministic bytes for one report in ``csv``, ``json`` or aligned ``table`` form."""
    if fmt == "json":
        return (json.dumps(report_to_dict(report), indent=2, ensure_ascii=False) + "\n").encode("utf-8")
    header = ["dataset", "model", "prompt", *_columns(sorted(report.f1_at))]
    if fmt == "csv":
        return _rows_csv(header, [_report_row(report)])
    if fmt == "table":
        return _rows_table(header, [_report_row(report)])
    raise ValueError(f"unknown report format {fmt!r}")


# ---------------------------------------------------------------- sweeps


@dataclass
class SweepRow:
    label: str
    report: EvalReport | None = None
    error: str | None = None


@dataclass
class ResultsTable:
    rows: list[SweepRow]

    def render(self, fmt: str = "table") -> bytes:
        ks = next((sorted(r.report.f1_at) for r in self.rows if r.report), list(DEFAULT_K))
        header = ["dataset", "model", "prompt", *_columns(ks), "error"]
        body = []
        for row in self.rows:
            if row.report is not None:
                body.append([*_report_row(row.report), ""])
            else:
                body.append(["-", "-", row.label, *["-"] * (len(header) - 4), row.error or ""])
        if fmt == "csv":
            return _rows_csv(header, body)
        if fmt == "json":
            data = [
                report_to_dict(r.report) if r.report else {"prompt": r.label, "error": r.error}
                for r in self.rows
            ]
            for item in data:
                item.pop("per_doc", None)
            return (json.dumps(data, indent=2, ensure_ascii=False) + "\n").encode("utf-8")
        return _rows_table(header, body)


def sweep(configs: Sequence[ExperimentConfig], gateway: Gateway | None = None) -> ResultsTable:
    """Run every configuration, continuing past failures, and collect one row each.

    Configurations sharing a cache path share one gateway.
    """
    if not configs:
        raise ConfigError("sweep needs at least one configuration")
    gateways: dict[tuple, Gateway] = {}
    rows = []
    for config in configs:
        label = f"{model_label(config)}:{config.llm.template_name if config.method == 'llm' else config.method}"
        try:
            config.validate()
            label = f"{model_label(config)}:{prompt_label(config)}"
            gw = gateway
            if gw is None and config.method == "llm":
                key = (
                    config.io.cache_path,
                    config.llm.backend,
                    config.backend.base_url,
                    config.backend.fixture or config.dataset.test_path,
                )
                if key not in gateways or config.io.cache_path is None:
                    gateways[key] = build_gateway(config)
                gw = gateways[key]
            rows.append(SweepRow(label, report=run_experiment(config, gw)))
        except Exception as exc:
            log.error("sweep row %s failed: %s", label, exc)
            rows.append(SweepRow(label, error=f"{type(exc).__name__}: {exc}"))
    return ResultsTable(rows)
