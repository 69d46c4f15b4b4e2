"""End-to-end evaluation protocol and report tables.

Summarizers are scored twice: once on annotator gold spans and once on
locator-predicted spans, with everything downstream of the span source held
identical. Per-query artifacts (extracted text, formatted input, summary,
scores) are persisted as JSON lines for audit; aggregate rows render as
CSV/JSON/text tables with per-block mean rows and improvement columns for
fine-tuned (``*``-suffixed) summarizer variants.

Reports carry no timestamps: identical config, seed, and cache state yield
byte-identical report files.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Callable

import numpy as np

from .checkpoint import load_checkpoint
from .embedding import (
    EmbeddingBackend,
    HashEmbeddingBackend,
    RemoteEmbeddingBackend,
    embed_query,
    embed_transcript,
)
from .errors import (
    ConfigError,
    ContractError,
    EvalAbortError,
    LocsumError,
    UndefinedImprovementError,
)
from .ingest import Corpus, Meeting, QueryRecord, preprocess_text
from .locator import LocatorParams, locator_forward
from .numfmt import decimal_mean, format_half_up, round_half_up
from .rouge import RougeReport, aggregate, score_pair
from .spans import DiscreteSpan, build_summarizer_input, discretize, extract_text
from .summarize import LeadKSummarizer, RemoteSummarizer, Summarizer

logger = logging.getLogger(__name__)

FAILURE_TOLERANCE = 0.10


@dataclass(frozen=True)
class ResultRow:
    span_source: str
    summarizer: str
    r1: float
    r2: float
    rl: float
    improvement_r1: float | None = None
    improvement_r2: float | None = None
    improvement_rl: float | None = None


@dataclass(frozen=True)
class QueryArtifact:
    meeting_id: str
    query_index: int
    kind: str
    span_source: str
    summarizer: str
    query: str
    span: tuple[int, int] | None
    span_text: str
    summarizer_input: str
    input_truncated: bool
    summary: str
    scores: dict

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class QueryFailure:
    meeting_id: str
    query_index: int
    error: str
    message: str


@dataclass
class EvalResult:
    rows: list[ResultRow]
    artifacts: list[QueryArtifact]
    failures: list[QueryFailure]


def _score_dict(report: RougeReport) -> dict:
    return {
        name: {"precision": s.precision, "recall": s.recall, "f1": s.f1}
        for name, s in (("r1", report.r1), ("r2", report.r2), ("rl", report.rl))
    }


SpanFn = Callable[[Meeting, QueryRecord], tuple[str, tuple[int, int] | None]]


def _evaluate(
    corpus: Corpus,
    summarizer: Summarizer,
    span_source: str,
    span_fn: SpanFn,
    kind: str,
    budget: int,
) -> EvalResult:
    """Shared engine: extract, format, summarize, and score each query."""
    queries = [
        (meeting, qi, query)
        for meeting in corpus.meetings
        for qi, query in enumerate(meeting.queries)
        if query.kind == kind
    ]
    if not queries:
        raise ContractError(
            f"split {corpus.split!r} has no {kind} queries to evaluate"
        )
    reports: list[RougeReport] = []
    artifacts: list[QueryArtifact] = []
    failures: list[QueryFailure] = []
    for meeting, qi, query in queries:
        try:
            span_text, span = span_fn(meeting, query)
            request = build_summarizer_input(
                preprocess_text(query.text), span_text, budget
            )
            result = summarizer.summarize(request)
            report = score_pair(
                result.summary,
                query.reference_summary,
                candidate_id=f"{meeting.id}:{qi}",
                reference_id=f"{meeting.id}:{qi}",
            )
        except LocsumError as exc:
            logger.warning(
                "query failed (%s #%d, %s): %s", meeting.id, qi, type(exc).__name__, exc
            )
            failures.append(
                QueryFailure(meeting.id, qi, type(exc).__name__, str(exc))
            )
            continue
        reports.append(report)
        artifacts.append(
            QueryArtifact(
                meeting_id=meeting.id,
                query_index=qi,
                kind=kind,
                span_source=span_source,
                summarizer=summarizer.name,
                query=query.text,
                span=span,
                span_text=span_text,
                summarizer_input=request.text,
                input_truncated=result.input_truncated,
                summary=result.summary,
                scores=_score_dict(report),
            )
        )
    if len(failures) > FAILURE_TOLERANCE * len(queries):
        causes = sorted({f.error for f in failures})
        raise EvalAbortError(
            f"{len(failures)}/{len(queries)} queries failed "
            f"(causes: {', '.join(causes)})"
        )
    means = aggregate(reports)
    row = ResultRow(
        span_source=span_source,
        summarizer=summarizer.name,
        r1=means["r1"],
        r2=means["r2"],
        rl=means["rl"],
    )
    return EvalResult(rows=[row], artifacts=artifacts, failures=failures)


def _gold_span_text(meeting: Meeting, query: QueryRecord) -> tuple[str, tuple[int, int] | None]:
    # Several annotated spans are all relevant; concatenate them in order.
    parts = [
        extract_text(meeting, DiscreteSpan(s.start, s.end)) for s in query.gold_spans
    ]
    first = query.gold_spans[0]
    return " ".join(parts), (first.start, first.end)


def run_gold_eval(
    corpus: Corpus, summarizer: Summarizer, budget: int = 1024
) -> EvalResult:
    """Score the summarizer on annotator gold spans.

    Specific queries use their annotated spans; general queries (which carry
    no annotation) use the whole meeting and report in a separate block.
    """
    result = _evaluate(corpus, summarizer, "gold", _gold_span_text, "specific", budget)
    has_general = any(
        q.kind == "general" for m in corpus.meetings for q in m.queries
    )
    if has_general:

        def whole_meeting(meeting: Meeting, query: QueryRecord):
            span = DiscreteSpan(0, meeting.length - 1)
            return extract_text(meeting, span), (span.start, span.end)

        general = _evaluate(
            corpus, summarizer, "gold-general", whole_meeting, "general", budget
        )
        result.rows.extend(general.rows)
        result.artifacts.extend(general.artifacts)
        result.failures.extend(general.failures)
    return result


def run_located_eval(
    corpus: Corpus,
    summarizer: Summarizer,
    params: LocatorParams,
    length_norm: int,
    backend: EmbeddingBackend,
    budget: int = 1024,
) -> EvalResult:
    """Score the summarizer on locator-predicted spans (specific queries)."""
    transcripts: dict[str, np.ndarray] = {}

    def located(meeting: Meeting, query: QueryRecord):
        if meeting.id not in transcripts:
            transcripts[meeting.id] = embed_transcript(backend, meeting)
        prediction = locator_forward(
            params,
            transcripts[meeting.id],
            embed_query(backend, query.text).rows,
            meeting.length,
            length_norm,
        )
        span = discretize(prediction, meeting.length)
        if not (0 <= span.start <= span.end < meeting.length):
            raise ContractError(f"located span {span} escaped its range")
        return extract_text(meeting, span), (span.start, span.end)

    label = f"located ({backend.descriptor.name})"
    return _evaluate(corpus, summarizer, label, located, "specific", budget)


def run_random_eval(
    corpus: Corpus,
    summarizer: Summarizer,
    seed: int,
    budget: int = 1024,
) -> EvalResult:
    """Baseline: uniformly random valid spans under a fixed seed."""
    rng = np.random.default_rng(seed)

    def random_span(meeting: Meeting, query: QueryRecord):
        a, b = sorted(rng.integers(0, meeting.length, size=2).tolist())
        span = DiscreteSpan(int(a), int(b))
        return extract_text(meeting, span), (span.start, span.end)

    return _evaluate(corpus, summarizer, "random", random_span, "specific", budget)


def improvement_percent(base: float, tuned: float) -> float:
    """(tuned - base) / base * 100, half-up to 1 decimal."""
    if base <= 0:
        raise UndefinedImprovementError(f"improvement undefined for base {base}")
    value = (Decimal(str(tuned)) - Decimal(str(base))) / Decimal(str(base)) * 100
    return float(value.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def annotate_improvements(rows: list[ResultRow]) -> list[ResultRow]:
    """Attach improvement columns to base rows that have a ``*`` variant.

    Within each span-source block, a row whose summarizer name is ``S`` gets
    improvement percentages against the row named ``S*``.
    """
    by_key = {(r.span_source, r.summarizer): r for r in rows}
    out = []
    for row in rows:
        tuned = by_key.get((row.span_source, row.summarizer + "*"))
        if tuned is None or row.summarizer.endswith("*"):
            out.append(row)
            continue
        out.append(
            replace(
                row,
                improvement_r1=improvement_percent(row.r1, tuned.r1),
                improvement_r2=improvement_percent(row.r2, tuned.r2),
                improvement_rl=improvement_percent(row.rl, tuned.rl),
            )
        )
    return out


def _mean_row(block: list[ResultRow]) -> ResultRow:
    improvements = [
        v
        for r in block
        for v in (r.improvement_r1, r.improvement_r2, r.improvement_rl)
        if v is not None
    ]
    return ResultRow(
        span_source=block[0].span_source,
        summarizer="Mean",
        r1=decimal_mean([r.r1 for r in block], 1),
        r2=decimal_mean([r.r2 for r in block], 1),
        rl=decimal_mean([r.rl for r in block], 1),
        # The mean of all improvement cells lands in the last column,
        # mirroring the reference table layout.
        improvement_rl=decimal_mean(improvements, 1) if improvements else None,
    )


REPORT_COLUMNS = (
    "span_source",
    "summarizer",
    "r1",
    "r2",
    "rl",
    "improvement_r1",
    "improvement_r2",
    "improvement_rl",
)


def _ordered_blocks(rows: list[ResultRow]) -> list[list[ResultRow]]:
    if not rows:
        raise ContractError("report needs at least one row")
    ordered = sorted(rows, key=lambda r: (r.span_source, r.summarizer))
    blocks: list[list[ResultRow]] = []
    for row in ordered:
        if blocks and blocks[-1][0].span_source == row.span_source:
            blocks[-1].append(row)
        else:
            blocks.append([row])
    return blocks


def _cell(value: float | None, ndigits: int) -> str:
    return "" if value is None else format_half_up(value, ndigits)


def _row_cells(row: ResultRow, score_digits: int) -> list[str]:
    return [
        row.span_source,
        row.summarizer,
        _cell(row.r1, score_digits),
        _cell(row.r2, score_digits),
        _cell(row.rl, score_digits),
        _cell(row.improvement_r1, 1),
        _cell(row.improvement_r2, 1),
        _cell(row.improvement_rl, 1),
    ]


def render_report(rows: list[ResultRow], fmt: str) -> str:
    """Render rows plus per-block mean rows as csv, json, or an aligned table."""
    blocks = _ordered_blocks(rows)
    table: list[list[str]] = []
    for block in blocks:
        for row in block:
            table.append(_row_cells(row, 2))
        table.append(_row_cells(_mean_row(block), 1))

    if fmt == "csv":
        lines = [",".join(REPORT_COLUMNS)]
        lines += [",".join(cells) for cells in table]
        return "\n".join(lines) + "\n"
    if fmt == "json":
        payload = []
        for block in blocks:
            for row in block:
                record = {
                    "span_source": row.span_source,
                    "summarizer": row.summarizer,
                    "r1": round_half_up(row.r1, 2),
                    "r2": round_half_up(row.r2, 2),
                    "rl": round_half_up(row.rl, 2),
                    "improvement_r1": row.improvement_r1,
                    "improvement_r2": row.improvement_r2,
                    "improvement_rl": row.improvement_rl,
                    "is_mean": False,
                }
                payload.append(record)
            mean = _mean_row(block)
            payload.append(
                {
                    "span_source": mean.span_source,
                    "summarizer": mean.summarizer,
                    "r1": mean.r1,
                    "r2": mean.r2,
                    "rl": mean.rl,
                    "improvement_r1": None,
                    "improvement_r2": None,
                    "improvement_rl": mean.improvement_rl,
                    "is_mean": True,
                }
            )
        return json.dumps({"rows": payload}, indent=2, sort_keys=True) + "\n"
    if fmt == "table":
        header = list(REPORT_COLUMNS)
        widths = [
            max(len(header[i]), max(len(cells[i]) for cells in table))
            for i in range(len(header))
        ]
        def fmt_line(cells):
            return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
        lines = [fmt_line(header), fmt_line(["-" * w for w in widths])]
        lines += [fmt_line(cells) for cells in table]
        return "\n".join(lines) + "\n"
    raise ConfigError(f"unknown report format {fmt!r}")


def read_report_csv(text: str) -> list[dict]:
    """Re-parse a rendered CSV report (round-trip helper)."""
    import csv
    import io

    return list(csv.DictReader(io.StringIO(text)))


def write_artifacts(path: Path | str, artifacts: list[QueryArtifact]) -> None:
    ordered = sorted(artifacts, key=lambda a: (a.span_source, a.meeting_id, a.query_index))
    with open(path, "w", encoding="utf-8") as handle:
        for artifact in ordered:
            handle.write(json.dumps(artifact.to_dict(), sort_keys=True) + "\n")


def rows_to_json(rows: list[ResultRow]) -> str:
    return json.dumps([asdict(r) for r in rows], indent=2, sort_keys=True) + "\n"


def rows_from_json(text: str) -> list[ResultRow]:
    return [ResultRow(**record) for record in json.loads(text)]


# --- configuration-driven runner -------------------------------------------

CONFIG_KEYS = {
    "train_dir": str,
    "val_dir": str,
    "test_dir": str,
    "embedding_backend": str,  # "hash" | "remote"
    "embedding_dim": int,
    "embedding_seed": int,
    "embedding_model": str,
    "service_url": str,
    "cache_dir": str,
    "summarizer": str,  # "lead<k>" | "remote:<model>"
    "span_source": str,  # "gold" | "located"
    "locator_checkpoint": str,
    "output_dir": str,
    "seed": int,
    "token_budget": int,
    "out_channels": int,
    "proj_dim": int,
    "hidden_dim": int,
    "kernel_size": int,
    "leaky_slope": float,
    "learning_rate": float,
    "epochs": int,
    "batch_size": int,
    "share_conv": bool,
    "length_norm": int,
}


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        unknown = sorted(set(raw) - set(CONFIG_KEYS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        values = {}
        for key, value in raw.items():
            expected = CONFIG_KEYS[key]
            try:
                values[key] = expected(value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"config key {key!r}: cannot read {value!r}") from exc
        return cls(values=values)

    @classmethod
    def load(cls, path: Path | str) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {str(path)!r}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a flat JSON object")
        return cls.from_dict(raw)

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def require(self, key: str):
        if key not in self.values:
            raise ConfigError(f"config key {key!r} is required here")
        return self.values[key]

    def override(self, **updates) -> "ExperimentConfig":
        merged = dict(self.values)
        merged.update({k: v for k, v in updates.items() if v is not None})
        return ExperimentConfig.from_dict(merged)


def build_embedding_backend(config: ExperimentConfig) -> EmbeddingBackend:
    kind = config.get("embedding_backend", "hash")
    if kind == "hash":
        return HashEmbeddingBackend(
            dimension=int(config.get("embedding_dim", 64)),
            seed=int(config.get("embedding_seed", config.get("seed", 0))),
        )
    if kind == "remote":
        return RemoteEmbeddingBackend(
            service_url=config.require("service_url"),
            model=config.require("embedding_model"),
            cache_dir=config.get("cache_dir"),
        )
    raise ConfigError(f"unknown embedding backend {kind!r}")


def build_summarizer(config: ExperimentConfig) -> Summarizer:
    name = config.get("summarizer", "lead3")
    if name.startswith("lead"):
        try:
            k = int(name[len("lead"):])
        except ValueError as exc:
            raise ConfigError(f"bad lead-k summarizer name {name!r}") from exc
        return LeadKSummarizer(k=k)
    if name.startswith("remote:"):
        return RemoteSummarizer(
            service_url=config.require("service_url"),
            model=name[len("remote:"):],
            cache_dir=config.get("cache_dir"),
        )
    raise ConfigError(f"unknown summarizer {name!r}")


def run_experiment(config: ExperimentConfig, corpus: Corpus) -> dict:
    """Run one configured evaluation and persist rows, artifacts, reports."""
    span_source = config.get("span_source", "gold")
    summarizer = build_summarizer(config)
    if span_source == "gold":
        result = run_gold_eval(corpus, summarizer, int(config.get("token_budget", 1024)))
    elif span_source == "located":
        checkpoint = config.get("locator_checkpoint")
        if not checkpoint:
            raise ConfigError("span_source 'located' requires locator_checkpoint")
        params, meta = load_checkpoint(checkpoint)
        backend = build_embedding_backend(config)
        if backend.dimension != meta.embed_dim:
            raise ConfigError(
                f"checkpoint embed dim {meta.embed_dim} != backend dim {backend.dimension}"
            )
        result = run_located_eval(
            corpus,
            summarizer,
            params,
            meta.length_norm,
            backend,
            int(config.get("token_budget", 1024)),
        )
    else:
        raise ConfigError(f"unknown span_source {span_source!r}")

    out_dir = Path(config.require("output_dir"))
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = annotate_improvements(result.rows)
    paths = {
        "rows": out_dir / "rows.json",
        "artifacts": out_dir / "artifacts.jsonl",
        "report_csv": out_dir / "report.csv",
        "report_json": out_dir / "report.json",
    }
    paths["rows"].write_text(rows_to_json(rows), encoding="utf-8")
    write_artifacts(paths["artifacts"], result.artifacts)
    paths["report_csv"].write_text(render_report(rows, "csv"), encoding="utf-8")
    paths["report_json"].write_text(render_report(rows, "json"), encoding="utf-8")
    logger.info(
        "evaluated %d queries (%d failures) -> %s",
        len(result.artifacts) + len(result.failures),
        len(result.failures),
        out_dir,
    )
    return {name: str(p) for name, p in paths.items()}
