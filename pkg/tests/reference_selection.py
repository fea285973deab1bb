"""Brute-force subset oracle used to audit the greedy candidate selector.

The audit protocol scores a *set* of candidates canonically: members are
joined in pool-index order, then scored with the reference ROUGE-1/2 mean
F1 against the target.  ``best_subset_score`` enumerates every subset up
to the size cap under that convention (at most 2^n evaluations for n
candidates), so the greedy selector's chosen set can never score above it
and disagreement means greedy settled on a suboptimal set.
"""

from __future__ import annotations

import random
from itertools import combinations
from typing import Sequence

from reference_rouge import ref_relevance

WORD_BANK = [
    "graph",
    "neural",
    "network",
    "sparse",
    "signal",
    "latent",
    "variable",
    "training",
    "metric",
    "kernel",
    "robust",
    "transfer",
    "policy",
    "gradient",
    "sampling",
    "prior",
    "query",
    "vector",
    "attention",
    "decoder",
]


def canonical_set_score(
    candidates: Sequence[str], chosen: Sequence[str], target: str
) -> float:
    """Score a selection as a set: join members in pool-index order.

    ``chosen`` holds candidate texts (possibly duplicated in the pool);
    each is matched to the first unused pool index.
    """
    used: list[int] = []
    for text in chosen:
        for i, cand in enumerate(candidates):
            if cand == text and i not in used:
                used.append(i)
                break
        else:
            raise ValueError(f"selection {text!r} not found in candidate pool")
    joined = " ".join(candidates[i] for i in sorted(used))
    return ref_relevance(joined, target)


def best_subset_score(candidates: Sequence[str], target: str, cap: int) -> float:
    """Exhaustive optimum over all candidate subsets of size <= cap.

    Each subset is joined in pool-index order before scoring, the same
    canonical convention ``canonical_set_score`` applies to a greedy
    selection.  The empty subset scores zero.
    """
    best = 0.0
    for size in range(1, min(cap, len(candidates)) + 1):
        for combo in combinations(range(len(candidates)), size):
            joined = " ".join(candidates[i] for i in combo)
            best = max(best, ref_relevance(joined, target))
    return best


def random_fixture(
    rng: random.Random, max_candidates: int = 8
) -> tuple[list[str], str]:
    """Random (candidates, target) pair for the greedy-vs-exhaustive audit.

    Targets are 4-8 distinct bank words.  Target-derived candidates are
    one- or two-word blocks carved from the target with a gap of at least
    one word between blocks, so no join of candidates can manufacture a
    target bigram at a boundary and every join order of a subset scores
    identically.  Distractor candidates (single words and two-word
    phrases built from non-target bank words) contribute nothing,
    keeping zero-gain early stopping and tie-breaking paths exercised.
    """
    n_target = rng.randint(4, 8)
    target_words = rng.sample(WORD_BANK, n_target)
    target = " ".join(target_words)
    blocks: list[str] = []
    pos = 0
    while pos < n_target:
        if rng.random() < 0.3:
            pos += 1
            continue
        length = 2 if pos + 1 < n_target and rng.random() < 0.4 else 1
        blocks.append(" ".join(target_words[pos : pos + length]))
        pos += length + 1
    rng.shuffle(blocks)
    free_distract = [w for w in WORD_BANK if w not in target_words]
    rng.shuffle(free_distract)
    n_cands = rng.randint(2, max_candidates)
    candidates: list[str] = []
    while len(candidates) < n_cands:
        roll = rng.random()
        if roll < 0.62 and blocks:
            candidates.append(blocks.pop())
        elif roll < 0.80 and free_distract:
            candidates.append(free_distract.pop())
        elif len(free_distract) >= 2:
            candidates.append(f"{free_distract.pop()} {free_distract.pop()}")
        elif not blocks and not free_distract:
            break
    return candidates, target
