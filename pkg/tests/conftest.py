from __future__ import annotations

import sys
import time
from dataclasses import dataclass
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from locsum.embedding import HashEmbeddingBackend
from locsum.ingest import Corpus, load_split_dir
from locsum.locator import LocatorConfig, LocatorParams
from locsum.training import TrainingLog, build_training_samples, init_params, train

from synthetic import make_corpus, mean_turn_index_error

DATA_DIR = Path(__file__).parent / "data" / "meetings"

SYNTH_CONFIG = LocatorConfig(seed=11)  # defaults: c=64, e=64, h=128, k=3, lr=1e-3, 30 epochs
SYNTH_DIM = 32
SYNTH_EMBED_SEED = 5


@pytest.fixture(scope="session")
def meetings_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def fixture_corpus() -> Corpus:
    return load_split_dir(DATA_DIR, "test")


@pytest.fixture()
def hash_backend() -> HashEmbeddingBackend:
    return HashEmbeddingBackend(dimension=16, seed=3)


@dataclass
class SyntheticRun:
    train_corpus: Corpus
    heldout_corpus: Corpus
    config_seed: int
    params: LocatorParams
    untrained: LocatorParams
    log: TrainingLog
    train_seconds: float
    trained_error: float
    untrained_error: float
    backend: HashEmbeddingBackend


@pytest.fixture(scope="session")
def synthetic_run() -> SyntheticRun:
    """Train once on the synthetic corpus; shared by pipeline and acceptance tests."""
    train_corpus, heldout_corpus = make_corpus(n_meetings=50, seed=7)
    backend = HashEmbeddingBackend(dimension=SYNTH_DIM, seed=SYNTH_EMBED_SEED)
    started = time.perf_counter()
    params, log = train(train_corpus, backend, SYNTH_CONFIG)
    train_seconds = time.perf_counter() - started
    untrained = init_params(SYNTH_CONFIG, backend.dimension)
    heldout_samples, _ = build_training_samples(heldout_corpus, backend)
    return SyntheticRun(
        train_corpus=train_corpus,
        heldout_corpus=heldout_corpus,
        config_seed=SYNTH_CONFIG.seed,
        params=params,
        untrained=untrained,
        log=log,
        train_seconds=train_seconds,
        trained_error=mean_turn_index_error(params, heldout_samples, log.length_norm),
        untrained_error=mean_turn_index_error(untrained, heldout_samples, log.length_norm),
        backend=backend,
    )
