"""Summarization backends: lead-k extractive baseline and remote seq2seq client.

The lead-k baseline exists so the whole pipeline runs offline and
deterministically; it strips the query prefix from the formatted input and
returns the first k sentences of the span text. The remote client posts the
formatted input verbatim to the sidecar's ``/summarize`` endpoint and caches
responses on disk like embeddings.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from .errors import EmptyExtractError, EmptySummaryError, ProtocolError
from .remote import JsonCache, ServiceClient
from .spans import SummarizerInput

# A sentence is anything up to a run of sentence-final punctuation,
# or a trailing fragment without one.
_SENTENCE_RE = re.compile(r"[^.!?]*[.!?]+|[^.!?]+$")


class Summarizer(Protocol):
    @property
    def name(self) -> str: ...

    def summarize(self, request: SummarizerInput) -> "SummaryResult": ...


@dataclass(frozen=True)
class SummaryResult:
    summary: str
    backend_name: str
    input_truncated: bool


def _span_text_of(formatted: str) -> str:
    """Recover the span text from ``<s> query </s> span </s>``."""
    _, sep, rest = formatted.partition(" </s> ")
    if not sep:
        return formatted
    if rest.endswith(" </s>"):
        rest = rest[: -len(" </s>")]
    return rest


def split_sentences(text: str) -> list[str]:
    return [m.strip() for m in _SENTENCE_RE.findall(text) if m.strip()]


class LeadKSummarizer:
    """Deterministic extractive baseline: first k sentences of the span."""

    def __init__(self, k: int = 3):
        if k < 1:
            raise ValueError("lead-k needs k >= 1")
        self.k = k

    @property
    def name(self) -> str:
        return f"lead{self.k}"

    def summarize(self, request: SummarizerInput) -> SummaryResult:
        span_text = _span_text_of(request.text)
        sentences = split_sentences(span_text)
        if not sentences:
            raise EmptyExtractError("span text has no sentences to extract")
        return SummaryResult(
            summary=" ".join(sentences[: self.k]),
            backend_name=self.name,
            input_truncated=request.truncated,
        )


class RemoteSummarizer:
    """Client for the sidecar's ``/summarize`` endpoint."""

    def __init__(
        self,
        service_url: str,
        model: str,
        cache_dir: Path | str | None = None,
        client: ServiceClient | None = None,
    ):
        self._client = client or ServiceClient(service_url)
        self._model = model
        advertised = self._client.get_json("/models")
        summarizers = {
            m["name"]: m for m in advertised if m.get("kind") == "summarizer"
        }
        if model not in summarizers:
            raise ProtocolError(
                f"model {model!r} is not an advertised summarizer; "
                f"available: {sorted(summarizers)}"
            )
        self._name = f"remote:{model}"
        self._cache = JsonCache(cache_dir, self._name) if cache_dir else None

    @property
    def name(self) -> str:
        return self._name

    @property
    def client(self) -> ServiceClient:
        return self._client

    def summarize(self, request: SummarizerInput) -> SummaryResult:
        document = self._cache.load(request.text) if self._cache is not None else None
        if document is None:
            document = self._client.post_json(
                "/summarize", {"model": self._model, "text": request.text}
            )
            if not str(document.get("summary", "")).strip():
                raise EmptySummaryError(f"model {self._model!r} returned an empty summary")
            if self._cache is not None:
                self._cache.store(
                    request.text,
                    {
                        "summary": document["summary"],
                        "truncated": bool(document.get("truncated", False)),
                    },
                )
        return SummaryResult(
            summary=str(document["summary"]),
            backend_name=self._name,
            input_truncated=request.truncated or bool(document.get("truncated", False)),
        )
