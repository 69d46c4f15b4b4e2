"""Seeded initialization, Adam updates, and the locator training loop.

Training is fully deterministic under a fixed seed: one generator drives
parameter initialization and every epoch's shuffle, and batches are reduced
in index order. Transcript and query embeddings are computed once before the
first epoch and reused throughout.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .embedding import EmbeddingBackend, embed_query, embed_transcript
from .errors import DivergenceError, EmptyTrainingSetError
from .ingest import Corpus
from .locator import LocatorConfig, LocatorParams, TrainingSample, locator_gradients

logger = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class TrainingLog:
    epoch_losses: list[float]
    sample_count: int
    length_norm: int
    embed_dim: int

    def to_dict(self) -> dict:
        return {
            "epoch_losses": self.epoch_losses,
            "sample_count": self.sample_count,
            "length_norm": self.length_norm,
            "embed_dim": self.embed_dim,
        }


def init_params(
    config: LocatorConfig, embed_dim: int, rng: np.random.Generator | None = None
) -> LocatorParams:
    """Draw every tensor from uniform(-0.05, 0.05) in declared order."""
    rng = rng if rng is not None else np.random.default_rng(config.seed)

    def draw(*shape: int) -> np.ndarray:
        return rng.uniform(-0.05, 0.05, size=shape)

    c, e, h, k = config.out_channels, config.proj_dim, config.hidden_dim, config.kernel_size
    params = LocatorParams(
        conv_kernel=draw(c, k, embed_dim),
        conv_bias=draw(c),
        w1=draw(e, c),
        b1=draw(e),
        w2=draw(h, 2 * e + 2),
        b2=draw(h),
        w3=draw(2, h),
        b3=draw(2),
        leaky_slope=config.leaky_slope,
    )
    if not config.share_conv:
        params.conv_kernel_q = draw(c, k, embed_dim)
        params.conv_bias_q = draw(c)
    return params


@dataclass
class AdamState:
    step: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)


def adam_update(
    params: LocatorParams,
    grads: LocatorParams,
    state: AdamState,
    learning_rate: float,
) -> None:
    """One in-place Adam step over every tensor."""
    state.step += 1
    t = state.step
    grad_by_name = dict(grads.tensors())
    for name, tensor in params.tensors():
        g = grad_by_name[name]
        m = state.first_moment.setdefault(name, np.zeros_like(tensor))
        v = state.second_moment.setdefault(name, np.zeros_like(tensor))
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        m_hat = m / (1.0 - ADAM_BETA1**t)
        v_hat = v / (1.0 - ADAM_BETA2**t)
        tensor -= learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def build_training_samples(
    corpus: Corpus, backend: EmbeddingBackend
) -> tuple[list[TrainingSample], int]:
    """Embed each meeting once and pair it with its specific queries.

    General queries carry no span annotation and are excluded from locator
    training. Returns the samples and the longest meeting length.
    """
    samples: list[TrainingSample] = []
    max_length = 0
    for meeting in corpus.meetings:
        specific = [q for q in meeting.queries if q.kind == "specific" and q.gold_spans]
        if not specific:
            continue
        transcript = embed_transcript(backend, meeting)
        max_length = max(max_length, meeting.length)
        for query in specific:
            samples.append(
                TrainingSample(
                    transcript=transcript,
                    query=embed_query(backend, query.text).rows,
                    gold_spans=query.gold_spans,
                    length=meeting.length,
                )
            )
    return samples, max_length


def train(
    corpus: Corpus, backend: EmbeddingBackend, config: LocatorConfig
) -> tuple[LocatorParams, TrainingLog]:
    """Gradient-descend the locator with Adam over shuffled (meeting, query) pairs."""
    samples, max_length = build_training_samples(corpus, backend)
    if not samples:
        raise EmptyTrainingSetError("corpus has no specific queries with gold spans")
    length_norm = config.length_norm if config.length_norm else max_length

    rng = np.random.default_rng(config.seed)
    params = init_params(config, backend.dimension, rng)
    state = AdamState()
    epoch_losses: list[float] = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(samples))
        loss_sum = 0.0
        for lo in range(0, len(order), config.batch_size):
            batch = [samples[i] for i in order[lo : lo + config.batch_size]]
            grads, mean_loss = locator_gradients(params, batch, length_norm)
            if not math.isfinite(mean_loss):
                raise DivergenceError(epoch=epoch, learning_rate=config.learning_rate)
            loss_sum += mean_loss * len(batch)
            adam_update(params, grads, state, config.learning_rate)
        epoch_losses.append(loss_sum / len(samples))
        logger.info("epoch %d/%d: mean loss %.6f", epoch, config.epochs, epoch_losses[-1])
    log = TrainingLog(
        epoch_losses=epoch_losses,
        sample_count=len(samples),
        length_norm=length_norm,
        embed_dim=backend.dimension,
    )
    return params, log
