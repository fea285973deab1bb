"""Attribute suggester: similarity math, MMR, triplet training, prediction."""

from __future__ import annotations

import random

import numpy as np
import pytest
import torch
import torch.nn.functional as F

from citegen.corpus import BodySection, Corpus, PaperRecord
from citegen.dataset import CitationAttributes, CitationInstance, ContextBundle
from citegen.encoder import EncoderConfig, build_base_encoder
from citegen.oracle import INTENTS
from citegen.suggester import (
    ExtractorConfig,
    IntentPredictor,
    PredictorTrainConfig,
    SuggesterModels,
    TripletQuery,
    TripletTrainConfig,
    build_triplet_queries,
    cosine,
    downsample_background,
    load_predictor,
    mmr_select,
    mmr_select_indices,
    mmr_step_scores,
    rank_candidates,
    save_predictor,
    suggest,
    train_intent_predictor,
    triplet_fine_tune,
    triplet_rank_loss,
)
from stub_models import FixedEmbedder, embedder_from_gram

TINY = EncoderConfig(d_model=24, n_heads=2, n_layers=1, dim_feedforward=48)


def make_instance(
    iid: str,
    target: str,
    local: tuple[str, ...] = ("Some context sentence.",),
    title: str = "Cited Title",
    abstract: str = "Cited abstract text.",
    intent: str | None = None,
) -> CitationInstance:
    instance = CitationInstance(
        instance_id=iid,
        citing_paper_id=f"citing-{iid}",
        cited_paper_id=f"cited-{iid}",
        target_sentence=target,
        context=ContextBundle(local, title, abstract),
    )
    if intent is not None:
        instance = instance.with_attributes(CitationAttributes(intent=intent))
    return instance


class TestCosine:
    def test_hand_value(self):
        assert cosine(np.array([1.0, 0.0]), np.array([0.8, 0.6])) == pytest.approx(
            0.8, abs=1e-12
        )

    def test_symmetry_and_self_similarity(self):
        a = np.array([0.3, -0.2, 0.9])
        b = np.array([-0.5, 0.1, 0.4])
        assert cosine(a, b) == pytest.approx(cosine(b, a), abs=1e-12)
        assert cosine(a, a) == pytest.approx(1.0, abs=1e-12)

    def test_zero_vector_raises(self):
        with pytest.raises(ValueError, match="zero"):
            cosine(np.zeros(3), np.ones(3))
        with pytest.raises(ValueError, match="zero"):
            cosine(np.ones(3), np.zeros(3))


class TestTripletRankLoss:
    def test_satisfied_pair_has_zero_loss(self):
        loss = triplet_rank_loss(
            torch.tensor(0.9), torch.tensor(0.7), rank_better=1, rank_worse=3,
            margin=0.01,
        )
        assert loss.item() == pytest.approx(0.0, abs=1e-12)

    def test_equal_similarities_pay_the_rank_gap(self):
        loss = triplet_rank_loss(
            torch.tensor(0.5, dtype=torch.float64),
            torch.tensor(0.5, dtype=torch.float64),
            rank_better=1,
            rank_worse=4,
            margin=0.01,
        )
        assert loss.item() == pytest.approx(0.03, abs=1e-12)

    def test_invalid_rank_order_raises(self):
        with pytest.raises(ValueError):
            triplet_rank_loss(torch.tensor(0.5), torch.tensor(0.5), 2, 2, 0.01)
        with pytest.raises(ValueError):
            triplet_rank_loss(torch.tensor(0.5), torch.tensor(0.5), 3, 1, 0.01)

    def test_gradient_signs_on_active_pair(self):
        better = torch.tensor(0.2, requires_grad=True)
        worse = torch.tensor(0.6, requires_grad=True)
        loss = triplet_rank_loss(better, worse, 1, 2, 0.01)
        loss.backward()
        assert better.grad.item() == pytest.approx(-1.0)
        assert worse.grad.item() == pytest.approx(1.0)

    def test_gradient_matches_central_differences_through_cosine(self):
        torch.manual_seed(0)
        vectors = torch.randn(3, 6, dtype=torch.float64)

        def loss_of(flat: torch.Tensor) -> torch.Tensor:
            q, better, worse = flat.view(3, 6)
            sims = F.cosine_similarity(
                q.unsqueeze(0), torch.stack([better, worse]), dim=1
            )
            return triplet_rank_loss(sims[0], sims[1], 1, 3, 0.01)

        flat = vectors.flatten().clone().requires_grad_(True)
        loss = loss_of(flat)
        assert loss.item() > 0.0, "fixture must exercise the active branch"
        loss.backward()
        h = 1e-6
        for idx in range(flat.numel()):
            bumped = flat.detach().clone()
            bumped[idx] += h
            up = loss_of(bumped).item()
            bumped[idx] -= 2 * h
            down = loss_of(bumped).item()
            numeric = (up - down) / (2 * h)
            analytic = flat.grad[idx].item()
            scale = max(abs(numeric), abs(analytic), 1e-8)
            assert abs(numeric - analytic) / scale < 1e-4


class TestRankCandidates:
    def _embedder(self) -> FixedEmbedder:
        return FixedEmbedder(
            {
                "query": [1.0, 0.0],
                "close": [0.9, 0.1],
                "far": [0.0, 1.0],
                "mid": [0.5, 0.5],
            }
        )

    def test_orders_by_similarity_with_dense_ranks(self):
        ranked = rank_candidates(self._embedder(), "query", ["far", "close", "mid"])
        assert [r.text for r in ranked] == ["close", "mid", "far"]
        assert [r.rank for r in ranked] == [1, 2, 3]
        assert ranked[0].score > ranked[1].score > ranked[2].score

    def test_ties_keep_lower_index_first(self):
        embedder = FixedEmbedder(
            {"q": [1.0, 0.0], "a": [0.5, 0.5], "b": [0.5, 0.5]}
        )
        ranked = rank_candidates(embedder, "q", ["a", "b"])
        assert [r.text for r in ranked] == ["a", "b"]

    def test_empty_candidates(self):
        assert rank_candidates(self._embedder(), "query", []) == []


class TestMmr:
    QUERY_SIMS = np.array([0.9, 0.8])
    PAIR_SIMS = np.array([[1.0, 0.95], [0.95, 1.0]])

    def test_step_scores_before_any_selection(self):
        scores = mmr_step_scores(self.QUERY_SIMS, self.PAIR_SIMS, [], alpha=0.2)
        assert scores == pytest.approx([0.72, 0.64], abs=1e-12)

    def test_step_scores_penalize_redundancy(self):
        scores = mmr_step_scores(self.QUERY_SIMS, self.PAIR_SIMS, [0], alpha=0.2)
        assert scores[1] == pytest.approx(0.8 * 0.8 - 0.2 * 0.95, abs=1e-12)

    def test_worked_selection_sequence(self):
        picks = mmr_select_indices(self.QUERY_SIMS, self.PAIR_SIMS, k=2, alpha=0.2)
        assert picks[0] == (0, pytest.approx(0.72, abs=1e-12))
        assert picks[1] == (1, pytest.approx(0.45, abs=1e-12))

    def test_alpha_zero_is_topk_cosine(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            n = rng.integers(1, 9)
            query_sims = rng.uniform(-1, 1, n)
            pair = rng.uniform(-1, 1, (n, n))
            pair = (pair + pair.T) / 2
            np.fill_diagonal(pair, 1.0)
            k = int(rng.integers(1, n + 1))
            picks = [i for i, _ in mmr_select_indices(query_sims, pair, k, 0.0)]
            topk = sorted(range(n), key=lambda i: (-query_sims[i], i))[:k]
            assert picks == topk

    def test_no_duplicates_and_exact_size(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            n = int(rng.integers(1, 9))
            query_sims = rng.uniform(-1, 1, n)
            pair = rng.uniform(-1, 1, (n, n))
            pair = (pair + pair.T) / 2
            np.fill_diagonal(pair, 1.0)
            k = int(rng.integers(1, 12))
            picks = [i for i, _ in mmr_select_indices(query_sims, pair, k, 0.3)]
            assert len(picks) == len(set(picks)) == min(k, n)

    def test_end_to_end_with_preset_similarities(self):
        embedder = embedder_from_gram(
            ["the query", "first keyword", "second keyword"],
            [[1.0, 0.9, 0.8], [0.9, 1.0, 0.95], [0.8, 0.95, 1.0]],
        )
        picks = mmr_select(
            embedder, "the query", ["first keyword", "second keyword"], k=2, alpha=0.2
        )
        assert [p.text for p in picks] == ["first keyword", "second keyword"]
        assert picks[0].objective == pytest.approx(0.72, abs=1e-6)
        assert picks[1].objective == pytest.approx(0.45, abs=1e-6)

    def test_empty_candidates(self):
        embedder = FixedEmbedder({"q": [1.0]})
        assert mmr_select(embedder, "q", [], 3, 0.2) == []


class TestExtractorConfig:
    def test_defaults(self):
        config = ExtractorConfig()
        assert config.margin == 0.01
        assert config.diversity == 0.2
        assert config.sentence_rank_clamp == 10
        assert (config.auto_keywords, config.auto_sentences) == (3, 2)
        assert config.ui_top_k == 5

    @pytest.mark.parametrize(
        "kwargs", [{"diversity": -0.1}, {"diversity": 1.2}, {"margin": 0.0}]
    )
    def test_invalid_values_raise(self, kwargs):
        with pytest.raises(ValueError):
            ExtractorConfig(**kwargs)


class TestBuildTripletQueries:
    def test_keyword_queries_use_chunked_candidates(self):
        instance = make_instance(
            "i1",
            target="The sparse model uses a novel kernel.",
            local=("The sparse model is standard.", "A novel kernel appears."),
            title="Kernel Methods",
            abstract="",
        )
        (query,) = build_triplet_queries([instance], "keywords")
        assert query.query_text == instance.context.contextual_text()
        assert "sparse model" in query.candidates
        assert len(query.candidates) == len(query.ranks)
        assert min(query.ranks) == 1

    def test_sentence_queries_read_cited_body_with_clamp(self):
        corpus = Corpus()
        body = tuple(f"Cited body sentence number {i}." for i in range(14))
        instance = make_instance("i1", target="Cited body sentence number 3.")
        corpus.add(
            PaperRecord(
                instance.cited_paper_id, "T", body=(BodySection("B", body),)
            )
        )
        (query,) = build_triplet_queries(
            [instance], "sentences", corpus=corpus, rank_clamp=10
        )
        assert query.candidates == body
        assert max(query.ranks) <= 10

    def test_fewer_than_two_candidates_skipped(self):
        instance = make_instance(
            "i1", target="Anything.", local=("Kernel.",), title="", abstract=""
        )
        assert build_triplet_queries([instance], "keywords") == []

    def test_unknown_kind_raises(self):
        instance = make_instance("i1", target="Anything.")
        with pytest.raises(ValueError, match="candidate kind"):
            build_triplet_queries([instance], "paragraphs")


class TestTripletFineTune:
    def test_training_improves_rank_of_best_candidate(self):
        words = ["kernel", "graph", "prior", "sparse", "policy", "metric"]
        queries = []
        texts = []
        for i, word in enumerate(words):
            others = [w for w in words if w != word]
            candidates = (word, others[i % 5], others[(i + 2) % 5])
            queries.append(
                TripletQuery(
                    query_text=f"about {word} methods",
                    candidates=candidates,
                    ranks=(1, 2, 3),
                )
            )
            texts.extend([queries[-1].query_text, *candidates])
        encoder = build_base_encoder(texts, TINY, seed=1)

        def mean_position_of_best() -> float:
            positions = []
            for query in queries:
                ranked = rank_candidates(encoder, query.query_text, list(query.candidates))
                best = query.candidates[0]
                positions.append([r.text for r in ranked].index(best))
            return sum(positions) / len(positions)

        before = mean_position_of_best()
        triplet_fine_tune(
            encoder, queries, train_config=TripletTrainConfig(epochs=25, seed=0)
        )
        after = mean_position_of_best()
        assert after < before or after == 0.0

    def test_queries_without_distinct_ranks_are_inert(self):
        queries = [
            TripletQuery("q text", ("one", "two"), (1, 1)),
        ]
        encoder = build_base_encoder(["q text", "one", "two"], TINY, seed=0)
        state_before = {k: v.clone() for k, v in encoder.state_dict().items()}
        triplet_fine_tune(encoder, queries, train_config=TripletTrainConfig(epochs=2))
        for key, value in encoder.state_dict().items():
            assert torch.equal(value, state_before[key])


class TestIntentPredictor:
    def _predictor(self, seed: int = 0) -> IntentPredictor:
        texts = ["local context sentence", "cited title", "cited abstract words"]
        return IntentPredictor(build_base_encoder(texts, TINY, seed=seed))

    def test_prediction_shape_and_label(self):
        prediction = self._predictor().predict(
            ["local context sentence"], "cited title", "cited abstract words"
        )
        assert prediction.logits.shape == (len(INTENTS),)
        assert prediction.probabilities.sum() == pytest.approx(1.0, abs=1e-5)
        assert prediction.label in INTENTS
        assert prediction.label == INTENTS[int(prediction.logits.argmax())]

    def test_jointly_empty_inputs_raise(self):
        predictor = self._predictor()
        with pytest.raises(ValueError, match="empty"):
            predictor.predict([" ", ""], "", "  ")

    def test_empty_context_with_title_is_fine(self):
        prediction = self._predictor().predict([], "cited title", "")
        assert prediction.label in INTENTS

    def test_untrained_predictions_near_uniform_over_inits(self):
        counts = {intent: 0 for intent in INTENTS}
        n = 120
        for seed in range(n):
            label = self._predictor(seed=seed).predict(
                ["local context sentence"], "cited title", "cited abstract words"
            ).label
            counts[label] += 1
        for intent in INTENTS:
            assert 0.15 <= counts[intent] / n <= 0.55, counts


class TestDownsampleBackground:
    def _pool(self):
        pool = []
        for i in range(1000):
            pool.append(make_instance(f"b{i}", "t", intent="background"))
        for i in range(100):
            pool.append(make_instance(f"m{i}", "t", intent="method"))
        for i in range(100):
            pool.append(make_instance(f"r{i}", "t", intent="result"))
        return pool

    def test_keeps_one_fifth_of_background(self):
        pool = downsample_background(self._pool(), random.Random(0), factor=5)
        by_intent = {}
        for instance in pool:
            by_intent.setdefault(instance.attributes.intent, []).append(instance)
        assert len(by_intent["background"]) == 200
        assert len(by_intent["method"]) == 100
        assert len(by_intent["result"]) == 100
        assert len(pool) == 400

    def test_small_background_kept_whole(self):
        pool = [make_instance(f"b{i}", "t", intent="background") for i in range(4)]
        pool += [make_instance("m0", "t", intent="method")]
        kept = downsample_background(pool, random.Random(0), factor=5)
        assert len(kept) == 5

    def test_deterministic_for_seed(self):
        first = downsample_background(self._pool(), random.Random(7))
        second = downsample_background(self._pool(), random.Random(7))
        assert [i.instance_id for i in first] == [i.instance_id for i in second]


class TestTrainIntentPredictor:
    def test_refuses_single_class(self):
        instances = [make_instance(f"i{k}", "t", intent="method") for k in range(6)]
        predictor = IntentPredictor(
            build_base_encoder(["some text"], TINY, seed=0)
        )
        with pytest.raises(ValueError, match="2 intent classes"):
            train_intent_predictor(instances, predictor, PredictorTrainConfig(epochs=1))

    def test_learns_separable_contexts(self):
        instances = []
        for k in range(8):
            instances.append(
                make_instance(
                    f"m{k}",
                    "t",
                    local=(f"we adopt the training procedure variant {k}.",),
                    title="Optimization Methods",
                    abstract="procedure details",
                    intent="method",
                )
            )
            instances.append(
                make_instance(
                    f"r{k}",
                    "t",
                    local=(f"accuracy improves by {k} points overall.",),
                    title="Benchmark Results",
                    abstract="score tables",
                    intent="result",
                )
            )
        texts = [" ".join(i.context.local_context) for i in instances]
        texts += [i.context.cited_title for i in instances]
        texts += [i.context.cited_abstract for i in instances]
        predictor = IntentPredictor(build_base_encoder(texts, TINY, seed=0))
        train_intent_predictor(
            instances, predictor, PredictorTrainConfig(epochs=25, seed=0)
        )
        correct = 0
        for instance in instances:
            prediction = predictor.predict(
                instance.context.local_context,
                instance.context.cited_title,
                instance.context.cited_abstract,
            )
            correct += prediction.label == instance.attributes.intent
        assert correct / len(instances) >= 0.9


class TestSuggest:
    def _models(self) -> SuggesterModels:
        texts = [
            "the sparse model is standard",
            "a novel kernel appears",
            "kernel methods",
            "cited abstract text",
            "cited body sentence",
        ]
        return SuggesterModels(
            intent_predictor=IntentPredictor(build_base_encoder(texts, TINY, seed=0)),
            keyword_encoder=build_base_encoder(texts, TINY, seed=1),
            sentence_encoder=build_base_encoder(texts, TINY, seed=2),
        )

    def _context(self) -> ContextBundle:
        return ContextBundle(
            (
                "The sparse model outperforms a dense baseline.",
                "A novel kernel uses gradient descent on manifold structure.",
            ),
            "Kernel Methods",
            "Cited abstract text.",
        )

    def _cited(self) -> PaperRecord:
        body = tuple(
            f"Cited body sentence number {i} with detail." for i in range(7)
        )
        return PaperRecord("cited", "Kernel Methods", body=(BodySection("B", body),))

    def test_auto_mode_caps(self):
        bundle = suggest(self._context(), self._cited(), self._models(), mode="auto")
        assert bundle.intent.label in INTENTS
        assert 0 < len(bundle.keywords) <= 3
        assert 0 < len(bundle.sentences) <= 2
        for scored in bundle.keywords + bundle.sentences:
            assert -1.0 <= scored.score <= 1.0

    def test_ui_mode_returns_top_five(self):
        bundle = suggest(self._context(), self._cited(), self._models(), mode="ui")
        assert len(bundle.keywords) == 5
        assert len(bundle.sentences) == 5

    def test_no_cited_paper_means_no_sentences(self):
        bundle = suggest(self._context(), None, self._models(), mode="auto")
        assert bundle.sentences == []
        assert bundle.keywords

    def test_unknown_mode_raises(self):
        with pytest.raises(ValueError, match="mode"):
            suggest(self._context(), None, self._models(), mode="full")

    def test_duplicate_body_sentences_offered_once(self):
        body = ("Repeated sentence here.",) * 4 + ("A different sentence.",)
        cited = PaperRecord("cited", "T", body=(BodySection("B", body),))
        bundle = suggest(self._context(), cited, self._models(), mode="ui")
        texts = [s.text for s in bundle.sentences]
        assert len(texts) == len(set(texts)) == 2


class TestPredictorPersistence:
    def test_round_trip_preserves_predictions(self, tmp_path):
        texts = ["context words", "title words", "abstract words"]
        predictor = IntentPredictor(build_base_encoder(texts, TINY, seed=4))
        inputs = (["context words"], "title words", "abstract words")
        before = predictor.predict(*inputs)
        path = tmp_path / "predictor.pt"
        save_predictor(path, predictor, meta={"note": "x"})
        restored = load_predictor(path)
        after = restored.predict(*inputs)
        assert after.label == before.label
        assert np.allclose(after.logits, before.logits, atol=1e-6)
