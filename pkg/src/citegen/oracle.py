"""Pseudo ground-truth citation attributes.

Intent comes from a classifier over the citation sentence itself, trained
jointly with two auxiliary scaffold tasks (section title, citation
worthiness).  Keywords and cited-paper sentences come from greedy selection
maximizing the mean ROUGE-1/2 F1 against the target sentence.
"""
from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import torch
import torch.nn.functional as F
from torch import nn

from .chunking import extract_candidate_keywords
from .corpus import Corpus
from .dataset import CitationAttributes, CitationInstance
from .encoder import (
    ClassificationHead,
    EncoderConfig,
    TinyTextEncoder,
    Vocab,
    whitespace_tokenize,
)
from .rouge import relevance_score

logger = logging.getLogger(__name__)

INTENTS = ("background", "method", "result")
MAX_ORACLE_KEYWORDS = 3
MAX_ORACLE_SENTENCES = 2


@dataclass(frozen=True)
class ScaffoldConfig:
    main_weight: float = 1.0
    section_scaffold_weight: float = 0.05
    worthiness_scaffold_weight: float = 0.01

    def __post_init__(self) -> None:
        if min(self.main_weight, self.section_scaffold_weight, self.worthiness_scaffold_weight) <= 0:
            raise ValueError("scaffold weights must be > 0")


@dataclass(frozen=True)
class IntentExample:
    """One row of a scaffold-labeled intent corpus.  Scaffold labels may be
    missing per row; a scaffold with no labels at all is disabled."""

    sentence: str
    intent: str | None
    section_title: str | None = None
    worthy: bool | None = None


@dataclass(frozen=True)
class ClassifierTrainConfig:
    epochs: int = 30
    learning_rate: float = 1e-3
    batch_size: int = 16
    seed: int = 0
    head_hidden_size: int = 32


def greedy_select(candidates: Sequence[str], target_sentence: str, max_items: int) -> list[str]:
    """Greedily pick candidates whose addition maximally increases the mean
    ROUGE-1/2 F1 of the space-joined selection against the target.

    Stops when no candidate yields a strictly positive gain or ``max_items``
    have been selected.  Ties break toward the lowest candidate index.
    """
    selected: list[str] = []
    remaining = list(range(len(candidates)))
    current = 0.0
    while remaining and len(selected) < max_items:
        best_index = None
        best_score = current
        for idx in remaining:
            score = relevance_score(" ".join(selected + [candidates[idx]]), target_sentence)
            if score > best_score:
                best_score = score
                best_index = idx
        if best_index is None:
            break
        selected.append(candidates[best_index])
        remaining.remove(best_index)
        current = best_score
    return selected


@dataclass(frozen=True)
class RankedRelevance:
    candidate: str
    score: float
    rank: int


def assign_relevance_ranks(
    candidates: Sequence[str], target_sentence: str, clamp: int | None = None
) -> list[RankedRelevance]:
    """Dense relevance ranking: rank 1 is the highest mean ROUGE-1/2 score,
    equal scores share a rank, and ``clamp`` caps the rank value."""
    scores = [relevance_score(c, target_sentence) for c in candidates]
    distinct = sorted(set(scores), reverse=True)
    rank_of = {score: pos + 1 for pos, score in enumerate(distinct)}
    out = []
    for candidate, score in zip(candidates, scores):
        rank = rank_of[score]
        if clamp is not None:
            rank = min(rank, clamp)
        out.append(RankedRelevance(candidate, score, rank))
    return out


class IntentClassifier(nn.Module):
    """Sentence-level intent classifier with optional scaffold heads."""

    def __init__(
        self,
        encoder: TinyTextEncoder,
        section_titles: Sequence[str] = (),
        head_hidden_size: int = 32,
    ):
        super().__init__()
        self.encoder = encoder
        self.section_titles = tuple(section_titles)
        d = encoder.d_model
        self.intent_head = ClassificationHead(d, len(INTENTS), head_hidden_size)
        self.section_head = (
            ClassificationHead(d, len(self.section_titles), head_hidden_size)
            if self.section_titles
            else None
        )
        self.worthiness_head = ClassificationHead(d, 2, head_hidden_size)

    def _cls(self, sentences: Sequence[str]) -> torch.Tensor:
        ids = [self.encoder.vocab.encode(whitespace_tokenize(s)) for s in sentences]
        return self.encoder.cls_states(ids)

    def forward(self, sentences: Sequence[str]) -> dict[str, torch.Tensor]:
        cls = self._cls(sentences)
        out = {"intent": self.intent_head(cls), "worthiness": self.worthiness_head(cls)}
        if self.section_head is not None:
            out["section"] = self.section_head(cls)
        return out

    @torch.no_grad()
    def predict_batch(self, sentences: Sequence[str], batch_size: int = 64) -> list[str]:
        self.eval()
        labels = []
        for start in range(0, len(sentences), batch_size):
            logits = self.forward(sentences[start : start + batch_size])["intent"]
            labels.extend(INTENTS[i] for i in logits.argmax(dim=1).tolist())
        return labels


def scaffold_loss(
    outputs: dict[str, torch.Tensor],
    intent_targets: torch.Tensor,
    section_targets: torch.Tensor | None,
    worthy_targets: torch.Tensor | None,
    config: ScaffoldConfig,
) -> tuple[torch.Tensor, dict[str, float]]:
    """Weighted sum of the three cross-entropy terms.  Target value -1 marks
    a missing label and is excluded from that term."""
    zero = torch.zeros((), dtype=torch.float32)
    parts: dict[str, float] = {}

    def masked_ce(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
        mask = targets >= 0
        if not mask.any():
            return zero
        return F.cross_entropy(logits[mask], targets[mask])

    main = masked_ce(outputs["intent"], intent_targets)
    total = config.main_weight * main
    parts["intent"] = float(main.detach())
    if section_targets is not None and "section" in outputs:
        section = masked_ce(outputs["section"], section_targets)
        total = total + config.section_scaffold_weight * section
        parts["section"] = float(section.detach())
    if worthy_targets is not None:
        worthy = masked_ce(outputs["worthiness"], worthy_targets)
        total = total + config.worthiness_scaffold_weight * worthy
        parts["worthiness"] = float(worthy.detach())
    return total, parts


def train_intent_classifier(
    examples: Sequence[IntentExample],
    encoder: TinyTextEncoder,
    scaffold_config: ScaffoldConfig | None = None,
    train_config: ClassifierTrainConfig | None = None,
) -> IntentClassifier:
    """Fine-tune the encoder plus heads on the labeled corpus.

    A scaffold with no labeled rows in the corpus is disabled with a warning.
    """
    scaffold_config = scaffold_config or ScaffoldConfig()
    cfg = train_config or ClassifierTrainConfig()
    torch.manual_seed(cfg.seed)

    sections = sorted({e.section_title for e in examples if e.section_title})
    if not sections:
        logger.warning("no section-title labels in corpus; section scaffold disabled")
    if not any(e.worthy is not None for e in examples):
        logger.warning("no citation-worthiness labels in corpus; worthiness scaffold disabled")
    section_index = {title: i for i, title in enumerate(sections)}

    model = IntentClassifier(encoder, sections, cfg.head_hidden_size)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    rng = random.Random(cfg.seed)
    order = list(range(len(examples)))

    model.train()
    for _ in range(cfg.epochs):
        rng.shuffle(order)
        for start in range(0, len(order), cfg.batch_size):
            batch = [examples[i] for i in order[start : start + cfg.batch_size]]
            outputs = model([e.sentence for e in batch])
            intent_t = torch.tensor(
                [INTENTS.index(e.intent) if e.intent in INTENTS else -1 for e in batch]
            )
            section_t = (
                torch.tensor([section_index.get(e.section_title, -1) for e in batch])
                if sections
                else None
            )
            worthy_t = torch.tensor(
                [-1 if e.worthy is None else int(e.worthy) for e in batch]
            )
            loss, _ = scaffold_loss(outputs, intent_t, section_t, worthy_t, scaffold_config)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
    model.eval()
    return model


def pseudo_label_intent(classifier: IntentClassifier, citation_sentence: str) -> str:
    """Argmax intent of the citation sentence under the trained classifier."""
    return classifier.predict_batch([citation_sentence])[0]


def label_dataset(
    instances: Sequence[CitationInstance],
    corpus: Corpus,
    classifier: IntentClassifier,
) -> list[CitationInstance]:
    """Attach oracle attributes to every instance: pseudo-labeled intent,
    up to 3 greedy keywords from the contextual text's noun phrases, and up
    to 2 greedy sentences from the cited paper's body."""
    intents = classifier.predict_batch([i.target_sentence for i in instances])
    labeled = []
    for instance, intent in zip(instances, intents):
        keyword_candidates = extract_candidate_keywords(instance.context.contextual_text())
        keywords = greedy_select(keyword_candidates, instance.target_sentence, MAX_ORACLE_KEYWORDS)
        cited = corpus.get(instance.cited_paper_id)
        body = cited.body_sentences() if cited is not None else []
        sentences = greedy_select(body, instance.target_sentence, MAX_ORACLE_SENTENCES)
        labeled.append(
            instance.with_attributes(
                CitationAttributes(
                    intent=intent,
                    keywords=tuple(keywords),
                    sentences=tuple(sentences),
                )
            )
        )
    return labeled


def save_intent_examples(path: str | Path, examples: Iterable[IntentExample]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(
                {
                    "sentence": ex.sentence,
                    "intent": ex.intent,
                    "section_title": ex.section_title,
                    "worthy": ex.worthy,
                },
                ensure_ascii=False,
            ))
            fh.write("\n")


def load_intent_examples(path: str | Path) -> list[IntentExample]:
    examples = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                obj = json.loads(line)
                examples.append(
                    IntentExample(
                        sentence=obj["sentence"],
                        intent=obj.get("intent"),
                        section_title=obj.get("section_title"),
                        worthy=obj.get("worthy"),
                    )
                )
    return examples


def save_classifier(path: str | Path, classifier: IntentClassifier, meta: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "state_dict": classifier.state_dict(),
            "vocab": classifier.encoder.vocab.to_json(),
            "encoder_config": classifier.encoder.config.__dict__,
            "section_titles": list(classifier.section_titles),
            "head_hidden_size": classifier.intent_head.net[0].out_features,
            "meta": meta or {},
        },
        path,
    )


def load_classifier(path: str | Path) -> IntentClassifier:
    payload = torch.load(Path(path), map_location="cpu", weights_only=False)
    encoder = TinyTextEncoder(
        Vocab.from_json(payload["vocab"]), EncoderConfig(**payload["encoder_config"])
    )
    classifier = IntentClassifier(
        encoder, payload["section_titles"], payload["head_hidden_size"]
    )
    classifier.load_state_dict(payload["state_dict"])
    classifier.eval()
    return classifier
