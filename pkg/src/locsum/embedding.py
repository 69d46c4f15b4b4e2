"""Token-embedding backends and the locator's input builders.

Transcripts are embedded utterance by utterance: each turn becomes the
average of its token vectors (one row per turn). Queries keep their full
token matrix so each query stays independent of the others.

Two backends are provided: a seeded hash backend (offline, deterministic,
any dimension) and a remote client that delegates tokenization and encoding
to the sidecar service, with an on-disk cache keyed by content hash.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from .errors import EmptyInputError, ProtocolError, TransportError
from .ingest import Meeting, preprocess_text
from .remote import ServiceClient, VectorCache


@dataclass(frozen=True)
class TokenMatrix:
    """One embedding row per token, in token order."""

    rows: np.ndarray  # (n_tokens, dim) float64
    tokens: tuple[str, ...]

    def __post_init__(self):
        self.rows.flags.writeable = False


@dataclass(frozen=True)
class BackendDescriptor:
    name: str
    dimension: int


class EmbeddingBackend(Protocol):
    @property
    def descriptor(self) -> BackendDescriptor: ...

    @property
    def dimension(self) -> int: ...

    def embed_cleaned(self, text: str) -> TokenMatrix:
        """Embed already-preprocessed, non-empty text."""
        ...


def embed_tokens(backend: EmbeddingBackend, text: str) -> TokenMatrix:
    """Preprocess ``text`` and embed it, one row per token."""
    cleaned = preprocess_text(text)
    if not cleaned:
        raise EmptyInputError("text is empty after preprocessing")
    return backend.embed_cleaned(cleaned)


def average_word_embedding(matrix: TokenMatrix) -> np.ndarray:
    """Component-wise mean of the token rows (AWE)."""
    if matrix.rows.shape[0] == 0:
        raise EmptyInputError("cannot average an empty token matrix")
    return matrix.rows.mean(axis=0)


def embed_query(backend: EmbeddingBackend, query_text: str) -> TokenMatrix:
    """Embed a query as a raw token matrix, not averaged."""
    return embed_tokens(backend, query_text)


def embed_transcript(backend: EmbeddingBackend, meeting: Meeting) -> np.ndarray:
    """Per-utterance AWE matrix, one row per turn.

    Turns whose cleaned text is empty (pure transcription noise) contribute a
    zero row so turn indices stay aligned with gold span annotations.
    """
    rows = np.zeros((meeting.length, backend.dimension))
    for t, turn in enumerate(meeting.turns):
        if not turn.cleaned:
            continue
        try:
            rows[t] = average_word_embedding(backend.embed_cleaned(turn.cleaned))
        except (TransportError, ProtocolError) as exc:
            raise type(exc)(f"meeting {meeting.id!r}, turn {t}: {exc}") from exc
    rows.flags.writeable = False
    return rows


class HashEmbeddingBackend:
    """Deterministic offline backend: seeded 64-bit hash -> unit vector.

    Tokenization is a whitespace split of the preprocessed text. The same
    (token, seed, dimension) always yields the same vector, on any platform.
    """

    def __init__(self, dimension: int, seed: int = 0):
        if dimension < 2:
            raise ValueError("hash backend needs dimension >= 2")
        self._dimension = dimension
        self._seed = seed
        self._key = (seed % 2**64).to_bytes(8, "little")

    @property
    def descriptor(self) -> BackendDescriptor:
        return BackendDescriptor(name="hash", dimension=self._dimension)

    @property
    def dimension(self) -> int:
        return self._dimension

    def _token_vector(self, token: str) -> np.ndarray:
        digest = hashlib.blake2b(
            token.encode("utf-8"), digest_size=8, key=self._key
        ).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        vector = rng.standard_normal(self._dimension)
        norm = np.linalg.norm(vector)
        if norm == 0.0:  # unreachable in practice for d >= 2
            vector[0] = 1.0
            norm = 1.0
        return vector / norm

    def embed_cleaned(self, text: str) -> TokenMatrix:
        tokens = tuple(text.split())
        if not tokens:
            raise EmptyInputError("no tokens to embed")
        rows = np.stack([self._token_vector(t) for t in tokens])
        return TokenMatrix(rows=rows, tokens=tokens)


class RemoteEmbeddingBackend:
    """Client for the sidecar's ``/embed`` endpoint (tokens mode).

    Responses are cached on disk per (model, text); repeat calls for cached
    text never touch the network.
    """

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
        encoders = {
            m["name"]: m for m in advertised if m.get("kind") == "encoder"
        }
        if model not in encoders:
            raise ProtocolError(
                f"model {model!r} is not an advertised encoder; "
                f"available: {sorted(encoders)}"
            )
        self._dimension = int(encoders[model]["dimension"])
        self._name = f"remote:{model}"
        self._cache = VectorCache(cache_dir, self._name) if cache_dir else None

    @property
    def descriptor(self) -> BackendDescriptor:
        return BackendDescriptor(name=self._name, dimension=self._dimension)

    @property
    def dimension(self) -> int:
        return self._dimension

    @property
    def client(self) -> ServiceClient:
        return self._client

    def embed_cleaned(self, text: str) -> TokenMatrix:
        if self._cache is not None:
            hit = self._cache.load(text)
            if hit is not None:
                matrix, tokens = hit
                return TokenMatrix(rows=matrix, tokens=tokens or ())
        payload = {"model": self._model, "texts": [text], "mode": "tokens"}
        response = self._client.post_json("/embed", payload)
        if int(response.get("dim", -1)) != self._dimension:
            raise ProtocolError(
                f"dimension mismatch: service returned {response.get('dim')}, "
                f"descriptor says {self._dimension}"
            )
        result = response["results"][0]
        rows = np.asarray(result["vectors"], dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != self._dimension:
            raise ProtocolError(f"malformed vectors shape {rows.shape}")
        tokens = tuple(result.get("tokens") or ())
        if self._cache is not None:
            self._cache.store(text, rows, tokens)
        return TokenMatrix(rows=rows, tokens=tokens)
