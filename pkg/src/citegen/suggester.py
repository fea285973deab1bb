"""Attribute suggestion: intent prediction from context, and relevance-ranked
keyword/sentence extraction.

The keyword and sentence extractors are two encoder instances fine-tuned
separately from the same base checkpoint with a margin ranking loss over
relevance ranks; selection uses cosine ranking plus maximal marginal
relevance for keywords.
"""
from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch import nn

from .chunking import extract_candidate_keywords
from .corpus import PaperRecord
from .dataset import CitationInstance, ContextBundle
from .encoder import (
    ClassificationHead,
    EncoderConfig,
    TinyTextEncoder,
    Vocab,
    whitespace_tokenize,
)
from .oracle import INTENTS, assign_relevance_ranks

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExtractorConfig:
    margin: float = 0.01
    diversity: float = 0.2
    sentence_rank_clamp: int = 10
    auto_keywords: int = 3
    auto_sentences: int = 2
    ui_top_k: int = 5
    mmr_for_sentences: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.diversity <= 1.0:
            raise ValueError("diversity must be in [0, 1]")
        if self.margin <= 0:
            raise ValueError("margin must be > 0")


def cosine(v_a: np.ndarray, v_b: np.ndarray) -> float:
    """Cosine similarity; raises on zero vectors."""
    v_a = np.asarray(v_a, dtype=np.float64)
    v_b = np.asarray(v_b, dtype=np.float64)
    norm_a = np.linalg.norm(v_a)
    norm_b = np.linalg.norm(v_b)
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("cosine similarity is undefined for zero vectors")
    return float(np.dot(v_a, v_b) / (norm_a * norm_b))


def triplet_rank_loss(
    sim_query_better: torch.Tensor,
    sim_query_worse: torch.Tensor,
    rank_better: int,
    rank_worse: int,
    margin: float,
) -> torch.Tensor:
    """Margin ranking loss for one candidate pair with rank_better < rank_worse:
    max(0, f(v_q, v_worse) - f(v_q, v_better) + (rank_worse - rank_better) * margin)."""
    if rank_better >= rank_worse:
        raise ValueError("loss is defined only for pairs with rank_better < rank_worse")
    gap = (rank_worse - rank_better) * margin
    return torch.clamp(sim_query_worse - sim_query_better + gap, min=0.0)


@dataclass(frozen=True)
class RankedCandidate:
    text: str
    embedding: np.ndarray
    score: float
    rank: int


def rank_candidates(
    encoder: TinyTextEncoder, query_text: str, candidate_texts: Sequence[str]
) -> list[RankedCandidate]:
    """Candidates sorted by cosine similarity to the query, descending;
    ties keep the lower candidate index first."""
    if not candidate_texts:
        return []
    with torch.no_grad():
        embeddings = encoder.embed_texts([query_text] + list(candidate_texts)).numpy()
    query_vec = embeddings[0]
    scored = [
        (cosine(query_vec, embeddings[i + 1]), i) for i in range(len(candidate_texts))
    ]
    order = sorted(range(len(scored)), key=lambda i: (-scored[i][0], i))
    return [
        RankedCandidate(
            text=candidate_texts[i],
            embedding=embeddings[i + 1],
            score=scored[i][0],
            rank=pos + 1,
        )
        for pos, i in enumerate(order)
    ]


def mmr_step_scores(
    query_sims: np.ndarray,
    pair_sims: np.ndarray,
    selected: Sequence[int],
    alpha: float,
) -> np.ndarray:
    """Objective value of every candidate given the current selection:
    (1 - alpha) * f(query, cand) - alpha * max over selected of f(cand, sel).
    The penalty term is 0 while nothing is selected."""
    relevance = (1.0 - alpha) * query_sims
    if not selected:
        return relevance
    penalty = alpha * pair_sims[:, list(selected)].max(axis=1)
    return relevance - penalty


@dataclass(frozen=True)
class MmrPick:
    index: int
    text: str
    objective: float


def mmr_select_indices(
    query_sims: np.ndarray, pair_sims: np.ndarray, k: int, alpha: float
) -> list[tuple[int, float]]:
    """Iterative MMR selection over precomputed similarities; ties break
    toward the lowest candidate index."""
    n = len(query_sims)
    selected: list[int] = []
    picks: list[tuple[int, float]] = []
    while len(selected) < min(k, n):
        scores = mmr_step_scores(query_sims, pair_sims, selected, alpha)
        scores = scores.copy()
        scores[selected] = -np.inf
        best = int(np.argmax(scores))
        picks.append((best, float(scores[best])))
        selected.append(best)
    return picks


def mmr_select(
    encoder: TinyTextEncoder,
    query_text: str,
    candidate_texts: Sequence[str],
    k: int,
    alpha: float,
) -> list[MmrPick]:
    """Select k candidates balancing query relevance against redundancy."""
    if not candidate_texts:
        return []
    with torch.no_grad():
        embeddings = encoder.embed_texts([query_text] + list(candidate_texts)).numpy()
    query_vec = embeddings[0]
    cand = embeddings[1:]
    query_sims = np.array([cosine(query_vec, v) for v in cand])
    n = len(candidate_texts)
    pair_sims = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            pair_sims[i, j] = pair_sims[j, i] = cosine(cand[i], cand[j])
    return [
        MmrPick(index=i, text=candidate_texts[i], objective=obj)
        for i, obj in mmr_select_indices(query_sims, pair_sims, k, alpha)
    ]


@dataclass(frozen=True)
class TripletQuery:
    """One ranking query: the context text plus candidates with their
    relevance ranks against the target citation sentence."""

    query_text: str
    candidates: tuple[str, ...]
    ranks: tuple[int, ...]


@dataclass(frozen=True)
class TripletTrainConfig:
    epochs: int = 3
    learning_rate: float = 1e-3
    pairs_per_query: int = 16
    seed: int = 0


def build_triplet_queries(
    instances: Sequence[CitationInstance],
    candidate_kind: str,
    corpus=None,
    rank_clamp: int | None = None,
) -> list[TripletQuery]:
    """Training queries for the extractors.

    ``candidate_kind`` is "keywords" (noun phrases chunked from the
    contextual text) or "sentences" (body sentences of the cited paper,
    ranks clamped).  Queries with fewer than two candidates are skipped.
    """
    queries = []
    for instance in instances:
        query_text = instance.context.contextual_text()
        if candidate_kind == "keywords":
            candidates = extract_candidate_keywords(query_text)
        elif candidate_kind == "sentences":
            cited = corpus.get(instance.cited_paper_id) if corpus is not None else None
            candidates = cited.body_sentences() if cited is not None else []
        else:
            raise ValueError(f"unknown candidate kind {candidate_kind!r}")
        if len(candidates) < 2:
            continue
        ranked = assign_relevance_ranks(candidates, instance.target_sentence, clamp=rank_clamp)
        queries.append(
            TripletQuery(
                query_text=query_text,
                candidates=tuple(r.candidate for r in ranked),
                ranks=tuple(r.rank for r in ranked),
            )
        )
    return queries


def triplet_fine_tune(
    encoder: TinyTextEncoder,
    queries: Sequence[TripletQuery],
    extractor_config: ExtractorConfig | None = None,
    train_config: TripletTrainConfig | None = None,
) -> TinyTextEncoder:
    """Fine-tune the encoder in place so higher-relevance candidates embed
    closer to their query.

    Pairs (i, j) with rank_i < rank_j are sampled uniformly per query, up to
    ``pairs_per_query`` per epoch; queries without two distinct ranks
    contribute nothing.
    """
    extractor_config = extractor_config or ExtractorConfig()
    cfg = train_config or TripletTrainConfig()
    torch.manual_seed(cfg.seed)
    rng = random.Random(cfg.seed)
    optimizer = torch.optim.Adam(encoder.parameters(), lr=cfg.learning_rate)

    valid_pairs_per_query = []
    for query in queries:
        pairs = [
            (i, j)
            for i in range(len(query.candidates))
            for j in range(len(query.candidates))
            if query.ranks[i] < query.ranks[j]
        ]
        valid_pairs_per_query.append(pairs)

    encoder.train()
    order = list(range(len(queries)))
    for _ in range(cfg.epochs):
        rng.shuffle(order)
        for q_idx in order:
            pairs = valid_pairs_per_query[q_idx]
            if not pairs:
                continue
            query = queries[q_idx]
            if len(pairs) > cfg.pairs_per_query:
                sampled = rng.sample(pairs, cfg.pairs_per_query)
            else:
                sampled = pairs
            embeddings = encoder.embed_texts([query.query_text, *query.candidates])
            query_vec = embeddings[0]
            sims = torch.nn.functional.cosine_similarity(
                query_vec.unsqueeze(0), embeddings[1:], dim=1
            )
            losses = [
                triplet_rank_loss(
                    sims[i], sims[j], query.ranks[i], query.ranks[j], extractor_config.margin
                )
                for i, j in sampled
            ]
            loss = torch.stack(losses).mean()
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
    encoder.eval()
    return encoder


@dataclass
class IntentPrediction:
    logits: np.ndarray
    probabilities: np.ndarray
    label: str


class IntentPredictor(nn.Module):
    """Predicts citation intent from the context before the sentence is
    written: local context joined to the cited paper's title and abstract
    with a [SEP] token, classified from the [CLS] hidden state."""

    def __init__(self, encoder: TinyTextEncoder, head_hidden_size: int = 32):
        super().__init__()
        self.encoder = encoder
        self.head = ClassificationHead(encoder.d_model, len(INTENTS), head_hidden_size)

    def _input_ids(self, local_context: Sequence[str], title: str, abstract: str) -> list[int]:
        vocab = self.encoder.vocab
        # [CLS] is added by cls_states; reserve one slot for it.  Local
        # context is kept ahead of the global context when truncating.
        budget = self.encoder.config.max_len - 2
        ctx_ids = vocab.encode(whitespace_tokenize(" ".join(local_context)))[:budget]
        budget -= len(ctx_ids)
        global_ids = vocab.encode(whitespace_tokenize(f"{title} {abstract}".strip()))[:budget]
        return ctx_ids + [vocab.sep_id] + global_ids

    def forward(self, inputs: Sequence[tuple[Sequence[str], str, str]]) -> torch.Tensor:
        ids = [self._input_ids(*item) for item in inputs]
        return self.head(self.encoder.cls_states(ids))

    @torch.no_grad()
    def predict(self, local_context: Sequence[str], title: str, abstract: str) -> IntentPrediction:
        if not any(s.strip() for s in local_context) and not title.strip() and not abstract.strip():
            raise ValueError("cannot predict intent from jointly empty inputs")
        self.eval()
        logits = self.forward([(local_context, title, abstract)])[0]
        probs = torch.softmax(logits, dim=0)
        return IntentPrediction(
            logits=logits.numpy(),
            probabilities=probs.numpy(),
            label=INTENTS[int(logits.argmax())],
        )


@dataclass(frozen=True)
class PredictorTrainConfig:
    epochs: int = 20
    learning_rate: float = 1e-3
    batch_size: int = 16
    seed: int = 0
    background_downsample: int = 5  # keep 1/5 of background examples


def downsample_background(
    instances: Sequence[CitationInstance], rng: random.Random, factor: int = 5
) -> list[CitationInstance]:
    """Training pool with background-intent instances cut to 1/factor of
    their count (sampled without replacement); other intents are kept whole.
    Fewer than ``factor`` background rows are kept as-is."""
    background = [i for i in instances if i.attributes.intent == "background"]
    rest = [i for i in instances if i.attributes.intent != "background"]
    keep = len(background) // factor
    return rest + (rng.sample(background, keep) if keep else background)


def train_intent_predictor(
    instances: Sequence[CitationInstance],
    predictor: IntentPredictor,
    config: PredictorTrainConfig | None = None,
) -> IntentPredictor:
    """Train the predictor on oracle-labeled instances, downsampling
    background-intent examples to 1/5 before each run.  Refuses to train on
    fewer than two distinct intent classes."""
    cfg = config or PredictorTrainConfig()
    labeled = [i for i in instances if i.attributes is not None and i.attributes.intent]
    classes = {i.attributes.intent for i in labeled}
    if len(classes) < 2:
        raise ValueError(f"need at least 2 intent classes to train, got {sorted(classes)}")

    rng = random.Random(cfg.seed)
    pool = downsample_background(labeled, rng, cfg.background_downsample)

    torch.manual_seed(cfg.seed)
    optimizer = torch.optim.Adam(predictor.parameters(), lr=cfg.learning_rate)
    predictor.train()
    order = list(range(len(pool)))
    for _ in range(cfg.epochs):
        rng.shuffle(order)
        for start in range(0, len(order), cfg.batch_size):
            batch = [pool[i] for i in order[start : start + cfg.batch_size]]
            logits = predictor(
                [
                    (b.context.local_context, b.context.cited_title, b.context.cited_abstract)
                    for b in batch
                ]
            )
            targets = torch.tensor([INTENTS.index(b.attributes.intent) for b in batch])
            loss = torch.nn.functional.cross_entropy(logits, targets)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
    predictor.eval()
    return predictor


@dataclass(frozen=True)
class ScoredText:
    text: str
    score: float


@dataclass
class SuggestionBundle:
    intent: IntentPrediction
    keywords: list[ScoredText] = field(default_factory=list)
    sentences: list[ScoredText] = field(default_factory=list)


@dataclass
class SuggesterModels:
    intent_predictor: IntentPredictor
    keyword_encoder: TinyTextEncoder
    sentence_encoder: TinyTextEncoder


def _dedupe(texts: Sequence[str]) -> list[str]:
    seen: set[str] = set()
    out = []
    for t in texts:
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


def suggest(
    context: ContextBundle,
    cited_paper: PaperRecord | None,
    models: SuggesterModels,
    config: ExtractorConfig | None = None,
    mode: str = "auto",
) -> SuggestionBundle:
    """Suggest citation attributes for a context and cited paper.

    ``mode="auto"`` returns (1 intent, up to 3 keywords, up to 2 sentences);
    ``mode="ui"`` returns top-5 keyword and sentence lists.  Keyword scores
    are cosine similarities to the contextual-text query; keywords are
    ordered by MMR selection, sentences by plain cosine rank.
    """
    config = config or ExtractorConfig()
    if mode not in ("auto", "ui"):
        raise ValueError(f"unknown suggestion mode {mode!r}")
    k_keywords = config.auto_keywords if mode == "auto" else config.ui_top_k
    k_sentences = config.auto_sentences if mode == "auto" else config.ui_top_k

    intent = models.intent_predictor.predict(
        context.local_context, context.cited_title, context.cited_abstract
    )
    query = context.contextual_text()

    keyword_candidates = extract_candidate_keywords(query)
    keywords: list[ScoredText] = []
    if keyword_candidates:
        with torch.no_grad():
            embs = models.keyword_encoder.embed_texts([query] + keyword_candidates).numpy()
        query_sims = np.array([cosine(embs[0], v) for v in embs[1:]])
        picks = mmr_select(
            models.keyword_encoder, query, keyword_candidates,
            min(k_keywords, len(keyword_candidates)), config.diversity,
        )
        keywords = [ScoredText(p.text, float(query_sims[p.index])) for p in picks]

    sentences: list[ScoredText] = []
    body = _dedupe(cited_paper.body_sentences()) if cited_paper is not None else []
    if body:
        if config.mmr_for_sentences:
            with torch.no_grad():
                embs = models.sentence_encoder.embed_texts([query] + body).numpy()
            query_sims = np.array([cosine(embs[0], v) for v in embs[1:]])
            picks = mmr_select(
                models.sentence_encoder, query, body,
                min(k_sentences, len(body)), config.diversity,
            )
            sentences = [ScoredText(p.text, float(query_sims[p.index])) for p in picks]
        else:
            ranked = rank_candidates(models.sentence_encoder, query, body)
            sentences = [ScoredText(r.text, r.score) for r in ranked[:k_sentences]]

    return SuggestionBundle(intent=intent, keywords=keywords, sentences=sentences)


def save_predictor(path: str | Path, predictor: IntentPredictor, meta: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "state_dict": predictor.state_dict(),
            "vocab": predictor.encoder.vocab.to_json(),
            "encoder_config": predictor.encoder.config.__dict__,
            "head_hidden_size": predictor.head.net[0].out_features,
            "meta": meta or {},
        },
        path,
    )


def load_predictor(path: str | Path) -> IntentPredictor:
    payload = torch.load(Path(path), map_location="cpu", weights_only=False)
    encoder = TinyTextEncoder(
        Vocab.from_json(payload["vocab"]), EncoderConfig(**payload["encoder_config"])
    )
    predictor = IntentPredictor(encoder, payload["head_hidden_size"])
    predictor.load_state_dict(payload["state_dict"])
    predictor.eval()
    return predictor
