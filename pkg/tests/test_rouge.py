"""Overlap scorer: hand-worked values, invariants, reference agreement."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from citegen.rouge import (
    RougeScore,
    mean_scores,
    relevance_score,
    rouge_l,
    rouge_n,
    score_pair,
    tokenize,
)
from reference_rouge import ref_relevance, ref_score_pair, ref_tokenize

ASCII_TEXT = st.text(
    alphabet=" .,!?-_'\"abcdefghijklmnopqrstuvwxyzABCDEFGHIJ0123456789", max_size=80
)


class TestHandValues:
    def test_unigram_prf(self):
        score = rouge_n(["a", "b", "c"], ["a", "b", "d", "e"], 1)
        assert score.precision == pytest.approx(2 / 3, abs=1e-12)
        assert score.recall == pytest.approx(1 / 2, abs=1e-12)
        assert score.f1 == pytest.approx(4 / 7, abs=1e-12)

    def test_bigram_f1(self):
        score = rouge_n(["a", "b", "c"], ["a", "b", "c", "d"], 2)
        assert score.precision == pytest.approx(1.0, abs=1e-12)
        assert score.f1 == pytest.approx(0.8, abs=1e-12)

    def test_lcs_f1(self):
        score = rouge_l(["a", "b", "c", "d"], ["a", "c", "b", "d"])
        assert score.precision == pytest.approx(0.75, abs=1e-12)
        assert score.recall == pytest.approx(0.75, abs=1e-12)
        assert score.f1 == pytest.approx(0.75, abs=1e-12)

    def test_relevance_mean_of_unigram_and_bigram_f1(self):
        value = relevance_score(
            "graph neural network", "we train a graph neural network"
        )
        assert value == pytest.approx(13 / 21, abs=1e-12)

    def test_clipping_caps_repeated_grams(self):
        score = rouge_n(["a", "a", "a"], ["a", "b"], 1)
        assert score.precision == pytest.approx(1 / 3, abs=1e-12)
        assert score.recall == pytest.approx(1 / 2, abs=1e-12)


class TestTokenize:
    def test_lowercases_and_splits_on_punctuation(self):
        assert tokenize("The neural-network's 2 layers!") == [
            "the",
            "neural",
            "network",
            "s",
            "2",
            "layers",
        ]

    def test_underscore_is_a_separator(self):
        assert tokenize("a_b c") == ["a", "b", "c"]

    def test_empty_and_symbol_only(self):
        assert tokenize("") == []
        assert tokenize("!!! --- ???") == []

    @given(ASCII_TEXT)
    def test_matches_reference_tokenizer(self, text):
        assert tokenize(text) == ref_tokenize(text)


class TestEdgeCases:
    def test_empty_candidate_scores_zero(self):
        score = rouge_n([], ["a", "b"], 1)
        assert (score.precision, score.recall, score.f1) == (0.0, 0.0, 0.0)

    def test_empty_reference_scores_zero(self):
        score = rouge_l(["a"], [])
        assert score.f1 == 0.0

    def test_from_counts_zero_sides(self):
        assert RougeScore.from_counts(0, 0, 5).f1 == 0.0
        assert RougeScore.from_counts(0, 5, 0).f1 == 0.0

    def test_rouge_n_rejects_bad_order(self):
        with pytest.raises(ValueError):
            rouge_n(["a"], ["a"], 0)

    def test_score_pair_has_all_metrics(self):
        scores = score_pair("a b", "a c")
        assert set(scores) == {"rouge1", "rouge2", "rougeL"}
        assert all(isinstance(v, RougeScore) for v in scores.values())


class TestProperties:
    @given(ASCII_TEXT, ASCII_TEXT, st.integers(min_value=1, max_value=3))
    def test_swapping_sides_swaps_precision_and_recall(self, a, b, n):
        forward = rouge_n(tokenize(a), tokenize(b), n)
        backward = rouge_n(tokenize(b), tokenize(a), n)
        assert forward.precision == pytest.approx(backward.recall, abs=1e-12)
        assert forward.recall == pytest.approx(backward.precision, abs=1e-12)

    @given(ASCII_TEXT)
    def test_identical_texts_score_one(self, text):
        tokens = tokenize(text)
        if not tokens:
            return
        assert rouge_n(tokens, tokens, 1).f1 == pytest.approx(1.0, abs=1e-12)
        assert rouge_l(tokens, tokens).f1 == pytest.approx(1.0, abs=1e-12)

    @given(ASCII_TEXT, ASCII_TEXT)
    @settings(max_examples=60)
    def test_all_components_bounded(self, a, b):
        for score in score_pair(a, b).values():
            assert 0.0 <= score.precision <= 1.0
            assert 0.0 <= score.recall <= 1.0
            assert 0.0 <= score.f1 <= 1.0

    @given(ASCII_TEXT, ASCII_TEXT)
    @settings(max_examples=60)
    def test_agrees_with_reference_scorer(self, a, b):
        ours = score_pair(a, b)
        theirs = ref_score_pair(a, b)
        for key in ("rouge1", "rouge2", "rougeL"):
            assert ours[key].precision == pytest.approx(theirs[key][0], abs=1e-9)
            assert ours[key].recall == pytest.approx(theirs[key][1], abs=1e-9)
            assert ours[key].f1 == pytest.approx(theirs[key][2], abs=1e-9)

    @given(ASCII_TEXT, ASCII_TEXT)
    @settings(max_examples=60)
    def test_relevance_agrees_with_reference(self, a, b):
        assert relevance_score(a, b) == pytest.approx(ref_relevance(a, b), abs=1e-9)


class TestMeanScores:
    def test_percent_convention(self):
        means = mean_scores(["a b c"], ["a b d e"])
        assert means["rouge1"] == pytest.approx(100 * 4 / 7, abs=1e-9)

    def test_averages_over_pairs(self):
        means = mean_scores(["a b", "x"], ["a b", "x"])
        assert means["rouge1"] == pytest.approx(100.0, abs=1e-9)
        assert means["rougeL"] == pytest.approx(100.0, abs=1e-9)

    def test_misaligned_lengths_raise(self):
        with pytest.raises(ValueError):
            mean_scores(["a"], ["a", "b"])

    def test_empty_input_gives_zeros(self):
        means = mean_scores([], [])
        assert means == {"rouge1": 0.0, "rouge2": 0.0, "rougeL": 0.0}


def test_extended_reference_agreement_on_random_pairs():
    """Seeded sweep complementing the hypothesis property above."""
    rng = random.Random(11)
    words = ["graph", "neural", "net", "sparse", "code", "prior", "a", "the", "2"]
    for _ in range(120):
        a = " ".join(rng.choices(words, k=rng.randint(0, 12)))
        b = " ".join(rng.choices(words, k=rng.randint(0, 12)))
        ours = score_pair(a, b)
        theirs = ref_score_pair(a, b)
        for key in ("rouge1", "rouge2", "rougeL"):
            assert abs(ours[key].f1 - theirs[key][2]) < 1e-9
