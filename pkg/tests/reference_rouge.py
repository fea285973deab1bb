"""Brute-force ROUGE reference used to cross-check the shipped scorer.

Deliberately written from the metric definitions alone, with none of the
production code's structure: a character-walk tokenizer, clipped n-gram
matching by decrementing counts, and a full two-dimensional LCS table.
Slow and obvious on purpose.
"""
from __future__ import annotations


def ref_tokenize(text: str) -> list[str]:
    """Lowercase; any maximal run of ASCII/unicode alphanumerics is a token."""
    tokens: list[str] = []
    current: list[str] = []
    for ch in text.lower():
        if ch.isalnum():
            current.append(ch)
        elif current:
            tokens.append("".join(current))
            current = []
    if current:
        tokens.append("".join(current))
    return tokens


def _prf(overlap: int, n_cand: int, n_ref: int) -> tuple[float, float, float]:
    if n_cand == 0 or n_ref == 0:
        return 0.0, 0.0, 0.0
    p = overlap / n_cand
    r = overlap / n_ref
    f1 = (2 * p * r / (p + r)) if (p + r) > 0 else 0.0
    return p, r, f1


def ref_rouge_n(candidate: list[str], reference: list[str], n: int) -> tuple[float, float, float]:
    """Clipped n-gram precision/recall/F1 by explicit enumeration."""
    cand_grams = [tuple(candidate[i : i + n]) for i in range(len(candidate) - n + 1)]
    ref_grams = [tuple(reference[i : i + n]) for i in range(len(reference) - n + 1)]
    budget: dict[tuple, int] = {}
    for gram in ref_grams:
        budget[gram] = budget.get(gram, 0) + 1
    overlap = 0
    for gram in cand_grams:
        if budget.get(gram, 0) > 0:
            budget[gram] -= 1
            overlap += 1
    return _prf(overlap, len(cand_grams), len(ref_grams))


def ref_lcs_length(a: list[str], b: list[str]) -> int:
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    return table[len(a)][len(b)]


def ref_rouge_l(candidate: list[str], reference: list[str]) -> tuple[float, float, float]:
    return _prf(ref_lcs_length(candidate, reference), len(candidate), len(reference))


def ref_score_pair(candidate: str, reference: str) -> dict[str, tuple[float, float, float]]:
    cand = ref_tokenize(candidate)
    ref = ref_tokenize(reference)
    return {
        "rouge1": ref_rouge_n(cand, ref, 1),
        "rouge2": ref_rouge_n(cand, ref, 2),
        "rougeL": ref_rouge_l(cand, ref),
    }


def ref_relevance(candidate: str, target: str) -> float:
    """Mean of ROUGE-1 and ROUGE-2 F1 on raw texts."""
    scores = ref_score_pair(candidate, target)
    return (scores["rouge1"][2] + scores["rouge2"][2]) / 2
