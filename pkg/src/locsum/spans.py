"""Turn raw span predictions into valid turn ranges and summarizer inputs.

Discretization makes out-of-range predictions impossible by construction:
round half-up, clamp into [0, length - 1], and order the endpoints. The
summarizer input follows the ``<s> query </s> spans </s>`` template with a
whitespace-token budget; the span text is cut from the end, never the query
or the delimiters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ContractError, OversizedQueryError
from .ingest import Meeting, preprocess_text
from .locator import SpanPrediction

DEFAULT_TOKEN_BUDGET = 1024


@dataclass(frozen=True)
class DiscreteSpan:
    """Valid inclusive turn range: 0 <= start <= end <= length - 1."""

    start: int
    end: int


@dataclass(frozen=True)
class SummarizerInput:
    text: str
    token_count: int
    truncated: bool


def discretize(pred: SpanPrediction, length: int) -> DiscreteSpan:
    """Round half-up, clamp into range, and order the endpoints."""
    if length < 1:
        raise ContractError("meeting length must be >= 1")
    if not (math.isfinite(pred.start_raw) and math.isfinite(pred.end_raw)):
        raise ContractError(f"non-finite prediction {pred}")
    start = min(max(math.floor(pred.start_raw + 0.5), 0), length - 1)
    end = min(max(math.floor(pred.end_raw + 0.5), 0), length - 1)
    if start > end:
        start, end = end, start
    return DiscreteSpan(start=start, end=end)


def extract_text(meeting: Meeting, span: DiscreteSpan) -> str:
    """Render turns start..end inclusive as ``speaker: cleaned`` joined by spaces."""
    if not (0 <= span.start <= span.end < meeting.length):
        raise ContractError(f"span {span} invalid for meeting of length {meeting.length}")
    return " ".join(
        f"{preprocess_text(turn.speaker)}: {turn.cleaned}"
        for turn in meeting.turns[span.start : span.end + 1]
    )


def build_summarizer_input(
    query_text: str, span_text: str, budget: int = DEFAULT_TOKEN_BUDGET
) -> SummarizerInput:
    """Format ``<s> query </s> span </s>`` within a whitespace-token budget."""
    if not query_text.strip():
        raise ContractError("query text is empty")
    fixed = len(query_text.split()) + 3  # query plus <s> </s> </s>
    if fixed > budget:
        raise OversizedQueryError(
            f"query needs {fixed} tokens, budget is {budget}"
        )
    span_tokens = span_text.split()
    keep = min(len(span_tokens), budget - fixed)
    truncated = keep < len(span_tokens)
    body = " ".join(span_tokens[:keep]) if truncated else span_text
    text = f"<s> {query_text} </s> {body} </s>"
    return SummarizerInput(
        text=text, token_count=len(text.split()), truncated=truncated
    )
