"""From-scratch ROUGE-1, ROUGE-2, and ROUGE-L scoring.

No stemming, no stopword removal: the simplest deterministic configuration,
so scores reproduce bit for bit. ROUGE-L uses sequence-level longest common
subsequence over the whole token lists.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .errors import ContractError
from .numfmt import decimal_mean

# Maximal alphanumeric runs; underscore and punctuation split tokens.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def metric_tokenize(text: str) -> list[str]:
    """Lowercase and split on any run of non-alphanumeric characters."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class RougeReport:
    r1: RougeScore
    r2: RougeScore
    rl: RougeScore
    candidate_id: str = ""
    reference_id: str = ""


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int) -> RougeScore:
    """Clipped n-gram overlap precision/recall/F1 (n in {1, 2})."""
    if n not in (1, 2):
        raise ContractError(f"rouge_n supports n in {{1, 2}}, got {n}")
    cand = _ngrams(candidate, n)
    ref = _ngrams(reference, n)
    overlap = sum((cand & ref).values())
    cand_total = sum(cand.values())
    ref_total = sum(ref.values())
    precision = overlap / cand_total if cand_total else 0.0
    recall = overlap / ref_total if ref_total else 0.0
    return RougeScore(precision=precision, recall=recall, f1=_f1(precision, recall))


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[-1]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> RougeScore:
    """Precision/recall/F1 from the longest common subsequence length."""
    if not candidate or not reference:
        return RougeScore(0.0, 0.0, 0.0)
    lcs = _lcs_length(candidate, reference)
    precision = lcs / len(candidate)
    recall = lcs / len(reference)
    return RougeScore(precision=precision, recall=recall, f1=_f1(precision, recall))


def score_pair(
    candidate_text: str,
    reference_text: str,
    candidate_id: str = "",
    reference_id: str = "",
) -> RougeReport:
    """Tokenize both texts and score all three metric variants."""
    cand = metric_tokenize(candidate_text)
    ref = metric_tokenize(reference_text)
    return RougeReport(
        r1=rouge_n(cand, ref, 1),
        r2=rouge_n(cand, ref, 2),
        rl=rouge_l(cand, ref),
        candidate_id=candidate_id,
        reference_id=reference_id,
    )


def aggregate(reports: Sequence[RougeReport]) -> dict[str, float]:
    """Mean F1 per metric, scaled by 100, rounded half-up to 2 decimals."""
    if not reports:
        raise ContractError("aggregate needs at least one report")
    return {
        "r1": decimal_mean((r.r1.f1 * 100.0 for r in reports), 2),
        "r2": decimal_mean((r.r2.f1 * 100.0 for r in reports), 2),
        "rl": decimal_mean((r.rl.f1 * 100.0 for r in reports), 2),
    }
