"""HTTP client for the model sidecar, plus the on-disk response caches.

Cache layout: ``<cache>/<backend>/<sha256-of-text>.vec`` holds a matrix as
two little-endian uint32 (rows, cols) followed by row-major float64 values.
Token strings for tokens-mode responses live in a ``.tokens.json`` sidecar
next to the ``.vec`` file. Summaries are cached as ``.json`` documents under
the same directory scheme.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import threading
import time
from pathlib import Path

import numpy as np
import requests

from .errors import ProtocolError, TransportError

_RETRYABLE_STATUS = frozenset({500, 502, 503, 504})


class ServiceClient:
    """Thin JSON-over-HTTP client with a bounded retry budget.

    ``request_count`` counts actual HTTP requests sent (including retries),
    which lets tests assert that cache hits stay off the network.
    """

    def __init__(
        self,
        base_url: str,
        max_attempts: int = 3,
        backoff: float = 0.2,
        timeout: float = 30.0,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.timeout = timeout
        self.request_count = 0
        self._session = session or requests.Session()

    def get_json(self, path: str):
        return self._request("GET", path, None)

    def post_json(self, path: str, payload: dict):
        return self._request("POST", path, payload)

    def _request(self, method: str, path: str, payload: dict | None):
        url = self.base_url + path
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff * (2 ** (attempt - 1)))
            try:
                self.request_count += 1
                response = self._session.request(
                    method, url, json=payload, timeout=self.timeout
                )
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_error = exc
                continue
            if response.status_code in _RETRYABLE_STATUS:
                last_error = TransportError(
                    f"{method} {url} -> {response.status_code}"
                )
                continue
            if response.status_code >= 400:
                raise ProtocolError(
                    f"{method} {url} -> {response.status_code}: {response.text[:500]}"
                )
            try:
                return response.json()
            except ValueError as exc:
                raise ProtocolError(f"{method} {url}: response is not JSON") from exc
        raise TransportError(
            f"{method} {url} failed after {self.max_attempts} attempts: {last_error}"
        )


def text_key(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


class VectorCache:
    """Per-backend matrix cache; write access is serialized with a lock."""

    def __init__(self, root: Path | str, backend_name: str):
        self.directory = Path(root) / backend_name
        self.directory.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()

    def _vec_path(self, text: str) -> Path:
        return self.directory / f"{text_key(text)}.vec"

    def load(self, text: str) -> tuple[np.ndarray, tuple[str, ...] | None] | None:
        path = self._vec_path(text)
        if not path.exists():
            return None
        raw = path.read_bytes()
        rows, cols = struct.unpack("<II", raw[:8])
        matrix = np.frombuffer(raw[8:], dtype="<f8").reshape(rows, cols).copy()
        tokens_path = path.with_suffix(".tokens.json")
        tokens = None
        if tokens_path.exists():
            tokens = tuple(json.loads(tokens_path.read_text(encoding="utf-8")))
        return matrix, tokens

    def store(self, text: str, matrix: np.ndarray, tokens: tuple[str, ...] | None = None) -> None:
        path = self._vec_path(text)
        rows, cols = matrix.shape
        blob = struct.pack("<II", rows, cols) + np.ascontiguousarray(
            matrix, dtype="<f8"
        ).tobytes()
        with self._write_lock:
            _atomic_write(path, blob)
            if tokens is not None:
                _atomic_write(
                    path.with_suffix(".tokens.json"),
                    json.dumps(list(tokens), ensure_ascii=False).encode("utf-8"),
                )


class JsonCache:
    """Per-backend JSON document cache (used for summarizer responses)."""

    def __init__(self, root: Path | str, backend_name: str):
        self.directory = Path(root) / backend_name
        self.directory.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()

    def _path(self, text: str) -> Path:
        return self.directory / f"{text_key(text)}.json"

    def load(self, text: str) -> dict | None:
        path = self._path(text)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def store(self, text: str, document: dict) -> None:
        with self._write_lock:
            _atomic_write(
                self._path(text),
                json.dumps(document, ensure_ascii=False, sort_keys=True).encode("utf-8"),
            )
