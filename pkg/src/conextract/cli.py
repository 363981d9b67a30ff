"""``conextract`` command line: stats, prompts, embed, extract, run, sweep, cache.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from .corpus import DatasetError, compute_stats, load_split, render_stats
from .gateway import Gateway, GatewayError, OpenAICompatibleBackend, ResponseCache, make_mock_backend
from .harness import (
    ConfigError,
    ExperimentConfig,
    RunError,
    apply_overrides,
    extract_split,
    render_report,
    run_experiment,
    sweep,
)
from .prompts import PromptError, TEMPLATE_NAMES, dump_catalog, list_templates

log = logging.getLogger("conextract")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit with 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_llm_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("LLM overrides (win over the config file)")
    g.add_argument("--model", dest="llm.model_id")
    g.add_argument("--backend", dest="llm.backend", choices=["openai", "echo-gold", "noisy-gold", "replay"])
    g.add_argument("--template", dest="llm.template_name", choices=TEMPLATE_NAMES)
    g.add_argument("--search-term", dest="llm.search_term")
    g.add_argument("--fs-n", dest="llm.fs_n", type=int)
    g.add_argument("--seed", dest="llm.seed", type=int)
    g.add_argument("--max-new-tokens", dest="llm.max_new_tokens", type=int)
    g.add_argument("--confidence", dest="llm.confidence", choices=["geometric_mean", "product"])
    g.add_argument("--base-url", dest="backend.base_url")
    g.add_argument("--api-key-env", dest="backend.api_key_env")
    g.add_argument("--fixture", dest="backend.fixture", help="mock fixture (dataset or recorded cache)")
    g.add_argument("--cache", dest="io.cache_path", help="response cache JSONL")


def _add_dataset_flags(p: argparse.ArgumentParser, required: bool) -> None:
    p.add_argument("--dataset", dest="dataset.test_path", required=required, help="test split JSONL")
    p.add_argument("--train", dest="dataset.train_path", help="training split JSONL")
    p.add_argument("--field-map", dest="dataset.field_map", help="preset (midas), JSON object or JSON file")
    p.add_argument("--limit", dest="dataset.limit", type=int, help="only the first N test documents")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="conextract", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("stats", help="document and concept statistics of a split")
    p.add_argument("--dataset", required=True)
    p.add_argument("--field-map")
    p.add_argument("--csv", metavar="FILE", help="also write the row as CSV")

    p = sub.add_parser("prompts", help="list or dump the prompt catalog")
    p.add_argument("--dump", action="store_true", help="dump templates as JSON")
    p.add_argument("--fs-n", type=int, default=1)

    p = sub.add_parser("embed", help="pre-populate the embedding cache for a split")
    p.add_argument("--dataset", required=True)
    p.add_argument("--field-map")
    p.add_argument("--model", default="all-mpnet-base-v2")
    p.add_argument("--cache", required=True, help="response cache path; embeddings go next to it")
    p.add_argument("--backend", default="openai", choices=["openai", "echo-gold"])
    p.add_argument("--base-url")
    p.add_argument("--api-key-env", default="OPENAI_API_KEY")

    p = sub.add_parser("extract", help="extract concepts without scoring")
    p.add_argument("--config")
    p.add_argument("--method", dest="method", choices=["llm", "tfidf", "firstphrases"])
    _add_dataset_flags(p, required=False)
    _add_llm_flags(p)
    p.add_argument("--top-n", dest="baseline.top_n", type=int)
    p.add_argument("--idf", dest="baseline.idf_path")
    p.add_argument("--output", help="JSONL destination (default stdout)")

    p = sub.add_parser("run", help="run one experiment and write its report")
    p.add_argument("--config")
    p.add_argument("--method", dest="method", choices=["llm", "tfidf", "firstphrases"])
    _add_dataset_flags(p, required=False)
    _add_llm_flags(p)
    p.add_argument("--top-n", dest="baseline.top_n", type=int)
    p.add_argument("--output-dir", dest="io.output_dir")
    p.add_argument("--concurrency", dest="concurrency", type=int)
    p.add_argument("--skip-failures", dest="skip_failures", action="store_const", const=True)
    p.add_argument("--format", choices=["table", "csv", "json"], default="table")

    p = sub.add_parser("sweep", help="run several configs and print one combined table")
    p.add_argument("--config", nargs="+", required=True, help="config files (each an object or a list)")
    p.add_argument("--format", choices=["table", "csv", "json"], default="table")
    p.add_argument("--output", help="also write the combined table here")

    p = sub.add_parser("cache", help="inspect or manage a response cache")
    p.add_argument("action", choices=["ls", "clear", "export"])
    p.add_argument("--cache", required=True)
    p.add_argument("--dest", help="export destination")
    return parser


def _config_from(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = {k: v for k, v in vars(args).items() if "." in k or k in ("method", "concurrency", "skip_failures")}
    return apply_overrides(config, overrides).validate()


def _cmd_stats(args) -> int:
    split = load_split(args.dataset, field_map=args.field_map)
    stats = compute_stats(split)
    sys.stdout.write(render_stats(split.name, stats))
    if args.csv:
        Path(args.csv).write_text(render_stats(split.name, stats, fmt="csv"), encoding="utf-8")
    return EXIT_OK


def _cmd_prompts(args) -> int:
    if args.dump:
        sys.stdout.write(dump_catalog(args.fs_n))
    else:
        sys.stdout.write("\n".join(list_templates()) + "\n")
    return EXIT_OK


def _cmd_embed(args) -> int:
    split = load_split(args.dataset, field_map=args.field_map)
    if args.backend == "openai":
        if not args.base_url:
            raise ConfigError("--base-url is required for the openai backend")
        backend = OpenAICompatibleBackend.from_env(args.base_url, args.api_key_env)
    else:
        backend = make_mock_backend("echo-gold", split)
    gateway = Gateway.from_paths(backend, args.cache)
    before = len(gateway.embedding_cache)
    gateway.embed([doc.text for doc in split.documents()], args.model)
    print(f"{len(split)} documents, {len(gateway.embedding_cache) - before} new embeddings cached")
    return EXIT_OK


def _cmd_extract(args) -> int:
    results = extract_split(_config_from(args))
    out = open(args.output, "w", encoding="utf-8") if args.output else sys.stdout
    try:
        for result in results:
            out.write(json.dumps(result.to_dict(), ensure_ascii=False) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def _cmd_run(args) -> int:
    config = _config_from(args)
    report = run_experiment(config)
    sys.stdout.write(render_report(report, args.format).decode("utf-8"))
    return EXIT_OK


def _load_configs(paths: Sequence[str]) -> list[ExperimentConfig]:
    configs = []
    for path in paths:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for item in data if isinstance(data, list) else [data]:
            configs.append(ExperimentConfig.from_dict(item))
    return configs


def _cmd_sweep(args) -> int:
    table = sweep(_load_configs(args.config))
    rendered = table.render(args.format)
    sys.stdout.write(rendered.decode("utf-8"))
    if args.output:
        Path(args.output).write_bytes(rendered)
    return EXIT_OK if any(row.report for row in table.rows) else EXIT_RUNTIME


def _cmd_cache(args) -> int:
    cache = ResponseCache(args.cache)
    if args.action == "ls":
        for record in sorted(cache.records(), key=lambda r: r["key"]):
            req = record.get("request") or {}
            text = record["value"]["text"].replace("\n", "\\n")
            print(f"{record['key'][:16]}  {req.get('model_id', '?'):<24}  {text[:60]}")
        print(f"{len(cache)} entries")
    elif args.action == "clear":
        n = len(cache)
        cache.clear()
        print(f"removed {n} entries")
    else:
        if not args.dest:
            raise ConfigError("cache export needs --dest")
        print(f"exported {cache.export(args.dest)} entries to {args.dest}")
    return EXIT_OK


COMMANDS = {
    "stats": _cmd_stats,
    "prompts": _cmd_prompts,
    "embed": _cmd_embed,
    "extract": _cmd_extract,
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "cache": _cmd_cache,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, PromptError, DatasetError, FileNotFoundError) as exc:
        print(f"conextract: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RunError, GatewayError) as exc:
        print(f"conextract: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
