"""Command-line interface: each pipeline stage is independently invocable.

Subcommands: ingest, validate, train, locate, summarize, evaluate, report.
Configuration comes from a flat JSON file (see ``pipeline.CONFIG_KEYS``)
with flag overrides; ``--seed`` is mandatory for train and evaluate.

Exit codes: 0 success, 2 configuration, 3 data validation, 4 service
transport, 5 training divergence, 1 unexpected failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .checkpoint import load_checkpoint, save_checkpoint
from .errors import (
    ConfigError,
    ContractError,
    DataError,
    DivergenceError,
    LocsumError,
    ProtocolError,
    TransportError,
)
from .ingest import dump_corpus, load_split_dir, validate_corpus
from .locator import LocatorConfig, locator_forward
from .pipeline import (
    ExperimentConfig,
    annotate_improvements,
    build_embedding_backend,
    build_summarizer,
    render_report,
    rows_from_json,
    run_experiment,
)
from .spans import build_summarizer_input, discretize, extract_text
from .training import train

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_TRANSPORT = 4
EXIT_DIVERGENCE = 5

logger = logging.getLogger(__name__)


def _load_config(args: argparse.Namespace, **overrides) -> ExperimentConfig:
    config = (
        ExperimentConfig.load(args.config)
        if getattr(args, "config", None)
        else ExperimentConfig()
    )
    return config.override(**overrides)


def _cmd_ingest(args) -> int:
    corpus = load_split_dir(args.input, args.split)
    dump = dump_corpus(corpus)
    if args.output:
        Path(args.output).write_text(dump, encoding="utf-8")
        print(f"wrote {len(corpus.meetings)} meetings to {args.output}")
    else:
        print(dump)
    return EXIT_OK


def _cmd_validate(args) -> int:
    corpus = load_split_dir(args.input, args.split)
    violations = validate_corpus(corpus)
    for v in violations:
        where = f"{v.meeting_id}" + (f" query {v.query_index}" if v.query_index is not None else "")
        print(f"violation: {where}: {v.invariant} ({v.detail})")
    queries = sum(len(m.queries) for m in corpus.meetings)
    print(
        f"{len(corpus.meetings)} meetings, {queries} queries, "
        f"{len(violations)} violations"
    )
    return EXIT_OK if not violations else EXIT_DATA


def _cmd_train(args) -> int:
    config = _load_config(
        args,
        train_dir=args.train_dir,
        seed=args.seed,
        embedding_backend=args.backend,
        embedding_dim=args.dim,
        epochs=args.epochs,
        learning_rate=args.learning_rate,
    )
    corpus = load_split_dir(config.require("train_dir"), "train")
    backend = build_embedding_backend(config)
    locator_config = LocatorConfig(
        out_channels=int(config.get("out_channels", 64)),
        proj_dim=int(config.get("proj_dim", 64)),
        hidden_dim=int(config.get("hidden_dim", 128)),
        kernel_size=int(config.get("kernel_size", 3)),
        leaky_slope=float(config.get("leaky_slope", 0.01)),
        learning_rate=float(config.get("learning_rate", 1e-3)),
        epochs=int(config.get("epochs", 30)),
        batch_size=int(config.get("batch_size", 8)),
        seed=int(config.require("seed")),
        length_norm=config.get("length_norm"),
        share_conv=bool(config.get("share_conv", True)),
    )
    params, log = train(corpus, backend, locator_config)
    save_checkpoint(args.output, params, log.length_norm, log)
    print(
        f"trained on {log.sample_count} samples for {locator_config.epochs} epochs; "
        f"final mean loss {log.epoch_losses[-1]:.6f}; checkpoint: {args.output}"
    )
    return EXIT_OK


def _cmd_locate(args) -> int:
    config = _load_config(args)
    corpus = load_split_dir(args.input, args.split)
    params, meta = load_checkpoint(args.checkpoint)
    backend = build_embedding_backend(config)
    if backend.dimension != meta.embed_dim:
        raise ConfigError(
            f"checkpoint embed dim {meta.embed_dim} != backend dim {backend.dimension}"
        )
    from .embedding import embed_query, embed_transcript

    records = []
    for meeting in corpus.meetings:
        transcript = embed_transcript(backend, meeting)
        for qi, query in enumerate(meeting.queries):
            if query.kind != "specific":
                continue
            pred = locator_forward(
                params,
                transcript,
                embed_query(backend, query.text).rows,
                meeting.length,
                meta.length_norm,
            )
            span = discretize(pred, meeting.length)
            records.append(
                {
                    "meeting_id": meeting.id,
                    "query_index": qi,
                    "start_raw": pred.start_raw,
                    "end_raw": pred.end_raw,
                    "start": span.start,
                    "end": span.end,
                }
            )
    payload = json.dumps(records, indent=2, sort_keys=True) + "\n"
    if args.output:
        Path(args.output).write_text(payload, encoding="utf-8")
        print(f"wrote {len(records)} spans to {args.output}")
    else:
        print(payload)
    return EXIT_OK


def _cmd_summarize(args) -> int:
    config = _load_config(args, summarizer=args.summarizer)
    corpus = load_split_dir(args.input, args.split)
    summarizer = build_summarizer(config)
    budget = int(config.get("token_budget", 1024))
    from .ingest import preprocess_text
    from .spans import DiscreteSpan

    outputs = []
    for meeting in corpus.meetings:
        for qi, query in enumerate(meeting.queries):
            if query.kind != "specific":
                continue
            spans = [DiscreteSpan(s.start, s.end) for s in query.gold_spans]
            span_text = " ".join(extract_text(meeting, s) for s in spans)
            request = build_summarizer_input(preprocess_text(query.text), span_text, budget)
            result = summarizer.summarize(request)
            outputs.append(
                {
                    "meeting_id": meeting.id,
                    "query_index": qi,
                    "summary": result.summary,
                    "input_truncated": result.input_truncated,
                }
            )
    payload = json.dumps(outputs, indent=2, sort_keys=True) + "\n"
    if args.output:
        Path(args.output).write_text(payload, encoding="utf-8")
        print(f"wrote {len(outputs)} summaries to {args.output}")
    else:
        print(payload)
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    config = _load_config(
        args,
        test_dir=args.test_dir,
        seed=args.seed,
        span_source=args.span_source,
        summarizer=args.summarizer,
        locator_checkpoint=args.checkpoint,
        output_dir=args.output_dir,
    )
    corpus = load_split_dir(config.require("test_dir"), "test")
    paths = run_experiment(config, corpus)
    print(json.dumps(paths, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_report(args) -> int:
    rows = []
    for path in args.rows:
        rows.extend(rows_from_json(Path(path).read_text(encoding="utf-8")))
    rows = annotate_improvements(rows)
    rendered = render_report(rows, args.format)
    if args.output:
        Path(args.output).write_text(rendered, encoding="utf-8")
        print(f"wrote report to {args.output}")
    else:
        print(rendered, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="locsum",
        description="Locate-then-summarize toolkit for query-based meeting summarization",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a split directory into a normalized dump")
    p.add_argument("--input", required=True, help="directory of meeting JSON files")
    p.add_argument("--split", default="test")
    p.add_argument("--output", help="dump file (stdout when omitted)")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("validate", help="check corpus invariants")
    p.add_argument("--input", required=True)
    p.add_argument("--split", default="test")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("train", help="train the locator")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--train-dir", dest="train_dir")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--backend", choices=["hash", "remote"])
    p.add_argument("--dim", type=int, help="hash backend dimension")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--output", required=True, help="checkpoint path")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("locate", help="predict spans with a trained locator")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--input", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--output")
    p.set_defaults(func=_cmd_locate)

    p = sub.add_parser("summarize", help="summarize gold spans")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--input", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--summarizer")
    p.add_argument("--output")
    p.set_defaults(func=_cmd_summarize)

    p = sub.add_parser("evaluate", help="run the evaluation protocol")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--test-dir", dest="test_dir")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--span-source", dest="span_source", choices=["gold", "located"])
    p.add_argument("--summarizer")
    p.add_argument("--checkpoint", help="locator checkpoint for located spans")
    p.add_argument("--output-dir", dest="output_dir")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("report", help="render result rows as a table")
    p.add_argument("--rows", nargs="+", required=True, help="rows.json files")
    p.add_argument("--format", choices=["csv", "json", "table"], default="table")
    p.add_argument("--output")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ContractError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TransportError, ProtocolError) as exc:
        print(f"service error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except LocsumError as exc:  # pragma: no cover - safety net
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    raise SystemExit(main())
