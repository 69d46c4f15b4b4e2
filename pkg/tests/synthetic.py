"""Synthetic corpus generator for locator learnability tests.

Each meeting's turns use disjoint per-turn vocabularies, and every query is
sampled from the tokens of one planted contiguous block. The gold span is
then *recomputed* by brute force as the contiguous block of turns sharing
the most token types with the query (ties: shortest block, then earliest),
which by construction recovers the planted block.
"""

from __future__ import annotations

import random

from locsum.ingest import Corpus, GoldSpan, Meeting, QueryRecord, Turn, preprocess_text
from locsum.locator import LocatorParams, TrainingSample, locator_forward
from locsum.spans import discretize


def _best_block(turn_tokens: list[set[str]], query_tokens: set[str]) -> tuple[int, int]:
    best = None
    length = len(turn_tokens)
    for start in range(length):
        shared: set[str] = set()
        for end in range(start, length):
            shared = shared | (turn_tokens[end] & query_tokens)
            key = (-len(shared), end - start, start)
            if best is None or key < best[0]:
                best = (key, (start, end))
    return best[1]


def make_meeting(index: int, rng: random.Random) -> Meeting:
    n_turns = rng.randint(8, 20)
    # Each turn mixes one position marker shared across meetings with tokens
    # unique to this (meeting, turn); queries sample both, so span location
    # is recoverable from query content alone and generalizes across meetings.
    turn_tokens = [
        [f"pos{t}"] + [f"m{index}t{t}w{j}" for j in range(rng.randint(3, 7))]
        for t in range(n_turns)
    ]
    turns = []
    for t, tokens in enumerate(turn_tokens):
        content = " ".join(tokens) + "."
        turns.append(
            Turn(speaker=f"speaker{t % 4}", content=content, cleaned=preprocess_text(content))
        )

    queries = []
    for _ in range(rng.randint(2, 3)):
        width = rng.randint(2, 4)
        start = rng.randint(0, n_turns - width)
        end = start + width - 1
        sampled = []
        for t in range(start, end + 1):
            sampled.append(f"pos{t}")
            sampled.extend(rng.sample(turn_tokens[t][1:], 2))
        gold = _best_block([set(ts) for ts in turn_tokens], set(sampled))
        assert gold == (start, end), "generator must plant the argmax block"
        reference = " ".join(" ".join(turn_tokens[t]) + "." for t in range(start, end + 1))
        queries.append(
            QueryRecord(
                text="summarize " + " ".join(sampled) + " .",
                reference_summary=reference,
                kind="specific",
                gold_spans=(GoldSpan(start, end),),
            )
        )
    return Meeting(id=f"synthetic{index:03d}", turns=tuple(turns), queries=tuple(queries))


def make_corpus(n_meetings: int = 50, seed: int = 7) -> tuple[Corpus, Corpus]:
    """(train, held-out) split: the last fifth of the meetings is held out."""
    rng = random.Random(seed)
    meetings = tuple(make_meeting(i, rng) for i in range(n_meetings))
    cut = n_meetings - n_meetings // 5
    return (
        Corpus(meetings=meetings[:cut], split="train"),
        Corpus(meetings=meetings[cut:], split="validation"),
    )


def mean_turn_index_error(
    params: LocatorParams, samples: list[TrainingSample], length_norm: float
) -> float:
    """Mean absolute error of the discretized endpoints vs the closest gold span."""
    total = 0.0
    for sample in samples:
        pred = locator_forward(
            params, sample.transcript, sample.query, sample.length, length_norm
        )
        span = discretize(pred, sample.length)
        total += min(
            (abs(span.start - g.start) + abs(span.end - g.end)) / 2.0
            for g in sample.gold_spans
        )
    return total / len(samples)
