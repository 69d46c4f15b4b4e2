"""QMSum meeting ingestion: parsing, text cleaning, and corpus validation.

A meeting file is one JSON object with ``meeting_transcripts`` (a list of
``{"speaker", "content"}`` turns) and one or both of ``general_query_list``
and ``specific_query_list``. Specific queries carry ``relevant_text_span``,
a list of ``[start, end]`` string pairs naming inclusive 0-based turn
indices. Splits differ slightly in which query lists they carry, so an
absent list is treated as empty.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ParseError, SchemaError, ValidationError

NOISE_TOKENS = ("vocalsound", "disfmarker", "nonvocalsound")

# Transcription noise markers appear bare or wrapped in one layer of
# braces/brackets/parens/angles, in any case.
_NOISE_RE = re.compile(
    r"[\{\[\(<]\s*(?:vocalsound|disfmarker|nonvocalsound)\s*[\}\]\)>]"
    r"|\b(?:vocalsound|disfmarker|nonvocalsound)\b",
    re.IGNORECASE,
)
_WS_RE = re.compile(r"\s+")


def preprocess_text(raw: str) -> str:
    """Lowercase, strip noise markers, and normalize whitespace. Idempotent."""
    text = raw.lower()
    # Removing a marker can butt two fragments together and expose a new
    # marker ("{ {vocalsound} vocalsound}" style nesting); repeat to fixpoint.
    while True:
        stripped = _NOISE_RE.sub(" ", text)
        if stripped == text:
            break
        text = stripped
    return _WS_RE.sub(" ", text).strip()


@dataclass(frozen=True)
class Turn:
    speaker: str
    content: str
    cleaned: str


@dataclass(frozen=True)
class GoldSpan:
    """Inclusive 0-based turn-index range annotated as query-relevant."""

    start: int
    end: int


@dataclass(frozen=True)
class QueryRecord:
    text: str
    reference_summary: str
    kind: str  # "general" | "specific"
    gold_spans: tuple[GoldSpan, ...] = ()


@dataclass(frozen=True)
class Meeting:
    id: str
    turns: tuple[Turn, ...]
    queries: tuple[QueryRecord, ...]
    topics: tuple[str, ...] = ()  # parsed but otherwise unused

    @property
    def length(self) -> int:
        return len(self.turns)


@dataclass(frozen=True)
class Corpus:
    meetings: tuple[Meeting, ...]
    split: str


@dataclass(frozen=True)
class Violation:
    meeting_id: str
    query_index: int | None
    invariant: str
    detail: str


def _parse_span(raw, meeting_id: str, kind: str, query_index: int) -> GoldSpan:
    if not isinstance(raw, (list, tuple)) or len(raw) != 2:
        raise SchemaError(
            f"meeting {meeting_id!r}, {kind} query {query_index}: "
            f"span must be a [start, end] pair, got {raw!r}"
        )
    bounds = []
    for element in raw:
        try:
            bounds.append(int(str(element), 10))
        except ValueError as exc:
            raise SchemaError(
                f"meeting {meeting_id!r}, {kind} query {query_index}: "
                f"span endpoint {element!r} is not an integer"
            ) from exc
    return GoldSpan(bounds[0], bounds[1])


def _parse_queries(obj: dict, meeting_id: str) -> tuple[QueryRecord, ...]:
    queries: list[QueryRecord] = []
    for kind, key in (("general", "general_query_list"), ("specific", "specific_query_list")):
        entries = obj.get(key) or []
        if not isinstance(entries, list):
            raise SchemaError(f"meeting {meeting_id!r}: {key} is not a list")
        for qi, entry in enumerate(entries):
            if not isinstance(entry, dict) or "query" not in entry or "answer" not in entry:
                raise SchemaError(
                    f"meeting {meeting_id!r}, {kind} query {qi}: "
                    "expected an object with 'query' and 'answer'"
                )
            spans: tuple[GoldSpan, ...] = ()
            if kind == "specific":
                spans = tuple(
                    _parse_span(s, meeting_id, kind, qi)
                    for s in entry.get("relevant_text_span") or []
                )
            queries.append(
                QueryRecord(
                    text=str(entry["query"]),
                    reference_summary=str(entry["answer"]),
                    kind=kind,
                    gold_spans=spans,
                )
            )
    return tuple(queries)


def parse_meeting(json_text: str, id: str) -> Meeting:
    """Parse one QMSum meeting object into a validated :class:`Meeting`."""
    try:
        obj = json.loads(json_text)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"meeting {id!r}: malformed JSON at byte {exc.pos}: {exc.msg}"
        ) from exc
    if not isinstance(obj, dict):
        raise SchemaError(f"meeting {id!r}: top-level value is not an object")
    if "meeting_transcripts" not in obj:
        raise SchemaError(f"meeting {id!r}: missing 'meeting_transcripts'")
    if "general_query_list" not in obj and "specific_query_list" not in obj:
        raise SchemaError(f"meeting {id!r}: no query list present")

    raw_turns = obj["meeting_transcripts"]
    if not isinstance(raw_turns, list):
        raise SchemaError(f"meeting {id!r}: 'meeting_transcripts' is not a list")
    turns = []
    for ti, raw in enumerate(raw_turns):
        if not isinstance(raw, dict) or not str(raw.get("speaker", "")).strip():
            raise SchemaError(f"meeting {id!r}: turn {ti} has no speaker")
        content = str(raw.get("content", ""))
        turns.append(Turn(str(raw["speaker"]), content, preprocess_text(content)))

    topics = tuple(
        str(t.get("topic", ""))
        for t in obj.get("topic_list") or []
        if isinstance(t, dict)
    )
    meeting = Meeting(
        id=id,
        turns=tuple(turns),
        queries=_parse_queries(obj, id),
        topics=topics,
    )
    violations = _meeting_violations(meeting)
    if violations:
        first = violations[0]
        raise ValidationError(
            f"meeting {first.meeting_id!r}"
            + (f", query {first.query_index}" if first.query_index is not None else "")
            + f": {first.invariant} ({first.detail})"
        )
    return meeting


def _meeting_violations(meeting: Meeting) -> list[Violation]:
    out: list[Violation] = []

    def flag(query_index: int | None, invariant: str, detail: str) -> None:
        out.append(Violation(meeting.id, query_index, invariant, detail))

    if meeting.length < 1:
        flag(None, "length >= 1", "meeting has no turns")
    for ti, turn in enumerate(meeting.turns):
        if not turn.speaker.strip():
            flag(None, "speaker non-empty", f"turn {ti}")
        if turn.cleaned != preprocess_text(turn.cleaned):
            flag(None, "cleaned normalized", f"turn {ti}")
    for qi, query in enumerate(meeting.queries):
        if query.kind not in ("general", "specific"):
            flag(qi, "kind in {general, specific}", repr(query.kind))
        if not query.reference_summary.strip():
            flag(qi, "reference_summary non-empty", "empty answer")
        if query.kind == "general" and query.gold_spans:
            flag(qi, "general query has 0 gold spans", f"{len(query.gold_spans)} spans")
        if query.kind == "specific" and not query.gold_spans:
            flag(qi, "specific query has >= 1 gold span", "no spans")
        for span in query.gold_spans:
            if span.start < 0:
                flag(qi, "start >= 0", f"start={span.start}")
            if span.start > span.end:
                flag(qi, "start <= end", f"span=({span.start}, {span.end})")
            if span.end >= meeting.length:
                flag(
                    qi,
                    "end < length",
                    f"span=({span.start}, {span.end}), length={meeting.length}",
                )
    return out


def validate_corpus(corpus: Corpus) -> list[Violation]:
    """Collect every invariant violation in the corpus (empty list = valid)."""
    violations: list[Violation] = []
    seen: set[str] = set()
    for meeting in corpus.meetings:
        if meeting.id in seen:
            violations.append(Violation(meeting.id, None, "unique id", "duplicate meeting id"))
        seen.add(meeting.id)
        violations.extend(_meeting_violations(meeting))
    return violations


def meeting_to_dict(meeting: Meeting) -> dict:
    """Serialize back to the on-disk schema (raw content, not cleaned)."""
    obj: dict = {
        "topic_list": [{"topic": t} for t in meeting.topics],
        "meeting_transcripts": [
            {"speaker": t.speaker, "content": t.content} for t in meeting.turns
        ],
    }
    for kind, key in (("general", "general_query_list"), ("specific", "specific_query_list")):
        entries = []
        for q in meeting.queries:
            if q.kind != kind:
                continue
            entry = {"query": q.text, "answer": q.reference_summary}
            if kind == "specific":
                entry["relevant_text_span"] = [
                    [str(s.start), str(s.end)] for s in q.gold_spans
                ]
            entries.append(entry)
        obj[key] = entries
    return obj


def load_meeting_file(path: Path | str) -> Meeting:
    path = Path(path)
    return parse_meeting(path.read_text(encoding="utf-8"), id=path.stem)


def load_split_dir(directory: Path | str, split: str) -> Corpus:
    """Load every ``*.json`` meeting file in a directory as one split."""
    directory = Path(directory)
    if not directory.is_dir():
        raise SchemaError(f"split directory {str(directory)!r} does not exist")
    meetings = tuple(load_meeting_file(p) for p in sorted(directory.glob("*.json")))
    return Corpus(meetings=meetings, split=split)


def dump_corpus(corpus: Corpus) -> str:
    """Normalized corpus dump used for fixtures and audits."""
    payload = {
        "split": corpus.split,
        "meetings": [
            {"id": m.id, **meeting_to_dict(m)} for m in corpus.meetings
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False)
