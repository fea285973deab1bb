"""Self-contained ROUGE-1/2/L F1 scoring.

Used both as the relevance oracle when labeling citation attributes and as
the evaluation metric for generated citation sentences.  Tokenization is
deliberately minimal (lowercase, split on non-alphanumeric runs, no stemming,
no stopword removal) so that scores are reproducible bit-for-bit.
"""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

# Runs of alphanumeric characters; underscore is a word char but not alphanumeric.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, overlap: int, n_candidate: int, n_reference: int) -> "RougeScore":
        if n_candidate == 0 or n_reference == 0:
            return cls(0.0, 0.0, 0.0)
        p = overlap / n_candidate
        r = overlap / n_reference
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(p, r, f1)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric characters, dropping empties."""
    return _TOKEN_RE.findall(text.lower())


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int) -> RougeScore:
    """Clipped n-gram overlap F1 between token sequences (n in {1, 2})."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    cand_grams = _ngrams(candidate, n)
    ref_grams = _ngrams(reference, n)
    overlap = sum((cand_grams & ref_grams).values())
    return RougeScore.from_counts(overlap, sum(cand_grams.values()), sum(ref_grams.values()))


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    # Single-row DP over the shorter sequence.
    if len(b) > len(a):
        a, b = b, a
    row = [0] * (len(b) + 1)
    for x in a:
        prev = 0
        for j, y in enumerate(b, start=1):
            cur = row[j]
            row[j] = prev + 1 if x == y else max(row[j], row[j - 1])
            prev = cur
    return row[len(b)]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> RougeScore:
    """Longest-common-subsequence F1 between token sequences."""
    lcs = _lcs_length(candidate, reference)
    return RougeScore.from_counts(lcs, len(candidate), len(reference))


def score_pair(candidate: str, reference: str) -> dict[str, RougeScore]:
    """ROUGE-1/2/L for a raw text pair, keyed 'rouge1'/'rouge2'/'rougeL'."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    return {
        "rouge1": rouge_n(cand, ref, 1),
        "rouge2": rouge_n(cand, ref, 2),
        "rougeL": rouge_l(cand, ref),
    }


def relevance_score(candidate: str, target: str) -> float:
    """Mean of ROUGE-1 and ROUGE-2 F1; the relevance oracle for keywords and
    sentences against a target citation sentence."""
    cand = tokenize(candidate)
    ref = tokenize(target)
    r1 = rouge_n(cand, ref, 1)
    r2 = rouge_n(cand, ref, 2)
    return (r1.f1 + r2.f1) / 2


def mean_scores(candidates: Sequence[str], references: Sequence[str]) -> dict[str, float]:
    """Mean ROUGE-1/2/L F1 over aligned candidate/reference pairs, in percent."""
    if len(candidates) != len(references):
        raise ValueError("candidates and references must be aligned")
    if not candidates:
        return {"rouge1": 0.0, "rouge2": 0.0, "rougeL": 0.0}
    totals = {"rouge1": 0.0, "rouge2": 0.0, "rougeL": 0.0}
    for cand, ref in zip(candidates, references):
        for key, score in score_pair(cand, ref).items():
            totals[key] += score.f1
    return {key: 100.0 * value / len(candidates) for key, value in totals.items()}
