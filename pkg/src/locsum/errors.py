"""Exception hierarchy shared across the toolkit.

The CLI maps these onto distinct exit codes: configuration problems,
data/schema violations, service transport failures, and training divergence
each get their own code so batch callers can dispatch on the cause.
"""

from __future__ import annotations


class LocsumError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(LocsumError):
    """Invalid experiment configuration (unknown key, missing required value)."""


class DataError(LocsumError):
    """Problems with input data: parsing, schema, or invariant violations."""


class ParseError(DataError):
    """Malformed JSON input; the message carries the byte offset."""


class SchemaError(DataError):
    """Structurally valid JSON that does not match the expected schema."""


class ValidationError(DataError):
    """Parsed data that violates a documented invariant."""


class EmptyInputError(DataError):
    """An operation received empty text or a zero-row matrix."""


class EmptyTrainingSetError(DataError):
    """Training requested on a corpus with no usable (query, span) pairs."""


class EmptyExtractError(DataError):
    """Summarization requested on an input whose span text is empty."""


class OversizedQueryError(DataError):
    """The query alone exceeds the summarizer token budget."""


class EvalAbortError(DataError):
    """Too many per-query failures; the evaluation run was aborted."""


class UndefinedImprovementError(DataError):
    """Improvement percentage requested against a non-positive base score."""


class ContractError(LocsumError):
    """Caller violated an operation contract (shape mismatch, non-finite input)."""


class DegenerateVectorError(ContractError):
    """Cosine similarity requested for a (near-)zero-norm vector."""


class TransportError(LocsumError):
    """Sidecar service unreachable after the retry budget was exhausted."""


class ProtocolError(LocsumError):
    """The sidecar answered, but not in the agreed protocol (unknown model,
    dimension mismatch, malformed body)."""


class EmptySummaryError(ProtocolError):
    """The summarization service returned an empty summary."""


class DivergenceError(LocsumError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, learning_rate: float):
        self.epoch = epoch
        self.learning_rate = learning_rate
        super().__init__(
            f"non-finite loss at epoch {epoch} (learning rate {learning_rate:g})"
        )
