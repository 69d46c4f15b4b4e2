"""Model loading and inference.

Models run in eval mode with gradients off; summarization pins beam search
(beam 4, max length 256, sampling off, at least 8 generated tokens), so all
responses are deterministic for a fixed checkpoint. Inference is serialized
per model with a lock: concurrent clients are safe, requests for the same
model simply queue.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field

import torch
from transformers import AutoConfig, AutoModel, AutoModelForSeq2SeqLM, AutoTokenizer

from .manifest import ModelSpec

logger = logging.getLogger(__name__)

SUMMARIZER_INPUT_CAP = 1024
GENERATION_DEFAULTS = dict(
    num_beams=4,
    do_sample=False,
    min_new_tokens=8,
    early_stopping=True,
)
DEFAULT_MAX_LENGTH = 256

_VERY_LARGE = 10**8


@dataclass
class LoadedModel:
    spec: ModelSpec
    tokenizer: object
    model: object
    dimension: int | None
    max_tokens: int
    lock: threading.Lock = field(default_factory=threading.Lock)


def _input_capacity(tokenizer, config) -> int:
    limit = getattr(tokenizer, "model_max_length", None)
    if limit and limit < _VERY_LARGE:
        return int(limit)
    positions = getattr(config, "max_position_embeddings", 512)
    # BERT-family position tables reserve two slots for the offset trick.
    return max(int(positions) - 2, 8)


def load_model(spec: ModelSpec) -> LoadedModel:
    logger.info("loading %s (%s) from %s", spec.name, spec.kind, spec.checkpoint)
    config = AutoConfig.from_pretrained(spec.checkpoint)
    tokenizer = AutoTokenizer.from_pretrained(spec.checkpoint)
    if spec.kind == "encoder":
        model = AutoModel.from_pretrained(spec.checkpoint)
        dimension = int(config.hidden_size)
        max_tokens = _input_capacity(tokenizer, config)
    else:
        model = AutoModelForSeq2SeqLM.from_pretrained(spec.checkpoint)
        dimension = None
        max_tokens = min(
            SUMMARIZER_INPUT_CAP,
            int(getattr(config, "max_position_embeddings", SUMMARIZER_INPUT_CAP)),
        )
    model.eval()
    return LoadedModel(
        spec=spec, tokenizer=tokenizer, model=model, dimension=dimension,
        max_tokens=max_tokens,
    )


@dataclass
class EmbeddedText:
    tokens: list[str]
    vectors: list[list[float]]
    truncated: bool


def embed_text(loaded: LoadedModel, text: str, mode: str) -> EmbeddedText:
    """Final-layer hidden states per subword token (special tokens dropped)."""
    tokenizer, model = loaded.tokenizer, loaded.model
    full_length = len(tokenizer(text)["input_ids"])
    with loaded.lock, torch.no_grad():
        encoded = tokenizer(
            text, return_tensors="pt", truncation=True, max_length=loaded.max_tokens
        )
        hidden = model(**encoded).last_hidden_state[0]
    ids = encoded["input_ids"][0].tolist()
    special = tokenizer.get_special_tokens_mask(ids, already_has_special_tokens=True)
    keep = [i for i, flag in enumerate(special) if not flag]
    tokens = tokenizer.convert_ids_to_tokens([ids[i] for i in keep])
    vectors = hidden[keep]
    if mode == "mean":
        vectors = vectors.mean(dim=0, keepdim=True)
        tokens = []
    return EmbeddedText(
        tokens=list(tokens),
        vectors=[[float(x) for x in row] for row in vectors],
        truncated=full_length > loaded.max_tokens,
    )


@dataclass
class GeneratedSummary:
    summary: str
    truncated: bool


def summarize_text(loaded: LoadedModel, text: str, max_length: int | None) -> GeneratedSummary:
    tokenizer, model = loaded.tokenizer, loaded.model
    full_length = len(tokenizer(text)["input_ids"])
    with loaded.lock, torch.no_grad():
        encoded = tokenizer(
            text, return_tensors="pt", truncation=True, max_length=loaded.max_tokens
        )
        generated = model.generate(
            **encoded,
            max_length=max_length or DEFAULT_MAX_LENGTH,
            **GENERATION_DEFAULTS,
        )
    summary = tokenizer.decode(generated[0], skip_special_tokens=True).strip()
    return GeneratedSummary(summary=summary, truncated=full_length > loaded.max_tokens)


class Registry:
    """Holds the loaded models; loading happens on a background thread."""

    def __init__(self, specs: list[ModelSpec]):
        self._specs = specs
        self._models: dict[str, LoadedModel] = {}
        self._ready = threading.Event()
        self._error: str | None = None

    def load_all(self) -> None:
        try:
            for spec in self._specs:
                self._models[spec.name] = load_model(spec)
        except Exception as exc:  # surfaced via /health
            logger.exception("model loading failed")
            self._error = f"{type(exc).__name__}: {exc}"
            return
        self._ready.set()

    def start_loading(self) -> threading.Thread:
        thread = threading.Thread(target=self.load_all, name="model-loader", daemon=True)
        thread.start()
        return thread

    @property
    def ready(self) -> bool:
        return self._ready.is_set()

    @property
    def error(self) -> str | None:
        return self._error

    def wait_ready(self, timeout: float | None = None) -> bool:
        return self._ready.wait(timeout)

    def get(self, name: str) -> LoadedModel | None:
        return self._models.get(name)

    def descriptors(self) -> list[dict]:
        out = []
        for spec in self._specs:
            loaded = self._models.get(spec.name)
            if loaded is None:
                continue
            entry = {
                "name": spec.name,
                "kind": spec.kind,
                "max_tokens": loaded.max_tokens,
            }
            if loaded.dimension is not None:
                entry["dimension"] = loaded.dimension
            out.append(entry)
        return out
