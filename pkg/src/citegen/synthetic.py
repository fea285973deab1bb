"""Miniature synthetic paper corpus for desk-scale experiments.

The world is built from a bank of topics, each owning a topic name and four
keyword phrases.  Every citing sentence instantiates an intent-specific
template with one keyword and its topic name; the preceding context plants
all four candidate keywords without revealing which one (or which intent)
the citing sentence uses, so conditioning on attributes carries real
information.  Context, title, and abstract templates are built only from
function words and verbs, keeping the chunkable noun phrases exactly the
planted keywords and the topic name.  Cited body sentences name the topic
but never a keyword, so the sentence attribute cannot stand in for the
keyword attribute.

Cited papers come in three disjoint pools (train/validation/test) sharing
the topic vocabulary, so split decoupling holds without shrinking the
token inventory.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .oracle import INTENTS, IntentExample

TOPIC_MODIFIERS = (
    "sparse", "neural", "robust", "latent", "modular", "adaptive",
    "hybrid", "compact", "scalable", "symbolic", "recursive", "spectral",
)
TOPIC_HEADS = (
    "retrieval", "alignment", "segmentation", "inference", "summarization",
    "translation", "classification", "clustering", "ranking", "search",
    "prediction", "detection",
)
KEYWORD_MODIFIERS = (
    "graph", "tensor", "kernel", "margin", "prototype", "attention",
    "beam", "cascade", "anchor", "codebook", "manifold", "template",
)
KEYWORD_HEADS = (
    "features", "priors", "masks", "losses", "scores", "routines",
    "layers", "gates", "caches", "filters", "heuristics", "operators",
)

# Context sentences use only boundary-safe filler so the planted phrases are
# the only keyword candidates the chunker can find.
CONTEXT_OPENERS = (
    "It has been shown that",
    "It is known that",
    "We observe that",
    "They demonstrate that",
)
CONTEXT_LINKS = (
    "can improve",
    "can be combined with",
    "may rely on",
    "can be used with",
    "may yield",
    "can build on",
)

# {cite} is the raw citation marker during corpus generation and the bare
# placeholder in the intent corpus.
INTENT_TEMPLATES: dict[str, tuple[str, ...]] = {
    "background": (
        "It has been shown that {kw} can improve {topic} {cite}.",
        "It is known that {kw} has been applied to {topic} {cite}.",
    ),
    "method": (
        "We adopt {kw} from {cite} to build our {topic} pipeline.",
        "We follow {cite} and use {kw} for our {topic} pipeline.",
    ),
    "result": (
        "Our results show that our {topic} outperforms {kw} from {cite}.",
        "We find that our {topic} exceeds {kw} reported in {cite}.",
    ),
}

SECTION_TITLES_BY_INTENT = {
    "background": ("introduction", "related work"),
    "method": ("method",),
    "result": ("experiments",),
}
ALL_SECTION_TITLES = ("introduction", "related work", "method", "experiments")


@dataclass(frozen=True)
class Topic:
    name: str
    keywords: tuple[str, ...]


def build_topics(n_topics: int = 12, keywords_per_topic: int = 4) -> list[Topic]:
    """Deterministic topic bank; keyword phrases are globally distinct."""
    if n_topics > len(TOPIC_MODIFIERS):
        raise ValueError(f"at most {len(TOPIC_MODIFIERS)} topics available")
    topics = []
    base = len(KEYWORD_MODIFIERS)
    for i in range(n_topics):
        name = f"{TOPIC_MODIFIERS[i]} {TOPIC_HEADS[i]}"
        keywords = tuple(
            f"{KEYWORD_MODIFIERS[(i + j) % base]} {KEYWORD_HEADS[(i + 2 * j) % base]}"
            for j in range(keywords_per_topic)
        )
        topics.append(Topic(name=name, keywords=keywords))
    return topics


@dataclass(frozen=True)
class DeskCorpusConfig:
    n_topics: int = 12
    keywords_per_topic: int = 4
    train_citing_papers: int = 48
    eval_citing_papers: int = 52
    train_sections: int = 6
    test_sections: int = 6
    validation_sections: int = 2
    train_years: tuple[int, int] = (2005, 2019)
    eval_year: int = 2020
    cited_year: int = 2012
    seed: int = 0

    def __post_init__(self) -> None:
        if self.train_years[1] >= self.eval_year:
            raise ValueError("train years must precede the eval year")


POOLS = ("train", "validation", "test")


def _cited_id(pool: str, topic_index: int) -> str:
    return f"C-{pool}-{topic_index:02d}"


def _marker(cited_id: str) -> str:
    return f"[{cited_id}]"


# Cited-body fillers share no content stems with any citing template, so
# the topic sentence is always the unique positive-gain greedy pick.
CITED_BODY_FILLERS = (
    "Most of these were never studied at scale.",
    "Several design choices remain open here.",
    "A broader survey would help later.",
)


def _cited_paper_record(pool: str, topic_index: int, topic: Topic, year: int) -> dict:
    # The topic sentence is the only body sentence sharing tokens with the
    # citing templates.  Title and abstract stay free of keyword phrases so
    # the citing context is the single source of keyword candidates; the
    # abstract uses only verbs and function words and contributes no chunks.
    body = [f"The {topic.name} can be improved in this regime."]
    body.extend(CITED_BODY_FILLERS)
    return {
        "paper_id": _cited_id(pool, topic_index),
        "title": f"On {topic.name}",
        "abstract": "We present and explore most of these.",
        "year": year,
        "domains": ["cs"],
        "body": [{"section_title": "method", "sentences": body}],
    }


def _context_sentences(topic_index: int, planted: Sequence[str]) -> list[str]:
    # Deterministic per topic: every section citing the same paper shares one
    # context string, so the context alone cannot identify the target keyword
    # and the generator has to read the keyword attribute to resolve it.
    openers, links = CONTEXT_OPENERS, CONTEXT_LINKS
    first = (
        f"{openers[topic_index % len(openers)]} {planted[0]} "
        f"{links[topic_index % len(links)]} {planted[1]}."
    )
    second = (
        f"{openers[(topic_index + 1) % len(openers)]} {planted[2]} "
        f"{links[(topic_index + 3) % len(links)]} {planted[3]}."
    )
    return [first, second]


def _citing_section(
    rng: random.Random, topics: Sequence[Topic], pool: str
) -> tuple[dict, str]:
    """One section = two context sentences planting all four keywords plus a
    citing sentence; returns the section dict and the cited paper id."""
    topic_index = rng.randrange(len(topics))
    topic = topics[topic_index]
    planted = list(topic.keywords)
    target_kw = planted[rng.randrange(len(planted))]
    intent = INTENTS[rng.randrange(len(INTENTS))]
    template = rng.choice(INTENT_TEMPLATES[intent])
    cited_id = _cited_id(pool, topic_index)
    target = template.format(kw=target_kw, topic=topic.name, cite=_marker(cited_id))
    section = {
        "section_title": rng.choice(SECTION_TITLES_BY_INTENT[intent]),
        "sentences": _context_sentences(topic_index, planted) + [target],
    }
    return section, cited_id


def build_desk_corpus(config: DeskCorpusConfig | None = None) -> tuple[list[dict], dict[str, str]]:
    """Raw paper records plus a marker bibliography, ready for ingestion.

    Evaluation citing papers are generated in sorted-id order and cite the
    test or validation cited-paper pool according to their position parity,
    matching the year-based split assignment so decoupling drops nothing.
    """
    cfg = config or DeskCorpusConfig()
    rng = random.Random(cfg.seed)
    topics = build_topics(cfg.n_topics, cfg.keywords_per_topic)

    records: list[dict] = []
    bibliography: dict[str, str] = {}
    for pool in POOLS:
        for t_idx, topic in enumerate(topics):
            record = _cited_paper_record(pool, t_idx, topic, cfg.cited_year)
            records.append(record)
            bibliography[_marker(record["paper_id"])] = record["paper_id"]

    lo, hi = cfg.train_years
    for i in range(cfg.train_citing_papers):
        sections = []
        for _ in range(cfg.train_sections):
            section, _cited = _citing_section(rng, topics, "train")
            sections.append(section)
        records.append(
            {
                "paper_id": f"P-train-{i:03d}",
                "title": f"A study in {topics[i % len(topics)].name}",
                "abstract": f"We report findings on {topics[i % len(topics)].name}.",
                "year": lo + (i % (hi - lo + 1)),
                "domains": ["cs"],
                "body": sections,
            }
        )

    for i in range(cfg.eval_citing_papers):
        pool = "test" if i % 2 == 0 else "validation"
        n_sections = cfg.test_sections if pool == "test" else cfg.validation_sections
        sections = []
        for _ in range(n_sections):
            section, _cited = _citing_section(rng, topics, pool)
            sections.append(section)
        records.append(
            {
                "paper_id": f"P-eval-{i:03d}",
                "title": f"A study in {topics[i % len(topics)].name}",
                "abstract": f"We report findings on {topics[i % len(topics)].name}.",
                "year": cfg.eval_year,
                "domains": ["cs"],
                "body": sections,
            }
        )

    return records, bibliography


def build_intent_corpus(
    n_per_intent: int = 150,
    n_unworthy: int = 150,
    seed: int = 1,
    topics: Sequence[Topic] | None = None,
) -> list[IntentExample]:
    """Labeled sentences in the style of an intent-annotated citation set:
    every intent template appears with random topic/keyword fillings, plus
    citation-free filler sentences labeled unworthy."""
    rng = random.Random(seed)
    topics = list(topics) if topics is not None else build_topics()
    examples = []
    for intent in INTENTS:
        for _ in range(n_per_intent):
            topic = rng.choice(topics)
            kw = rng.choice(topic.keywords)
            template = rng.choice(INTENT_TEMPLATES[intent])
            examples.append(
                IntentExample(
                    sentence=template.format(kw=kw, topic=topic.name, cite="[]"),
                    intent=intent,
                    section_title=rng.choice(SECTION_TITLES_BY_INTENT[intent]),
                    worthy=True,
                )
            )
    for _ in range(n_unworthy):
        topic = rng.choice(topics)
        planted = rng.sample(topic.keywords, 2)
        opener = rng.choice(CONTEXT_OPENERS)
        link = rng.choice(CONTEXT_LINKS)
        sentence = f"{opener} {planted[0]} {link} {planted[1]}."
        examples.append(
            IntentExample(
                sentence=sentence,
                intent=None,
                section_title=rng.choice(ALL_SECTION_TITLES),
                worthy=False,
            )
        )
    rng.shuffle(examples)
    return examples


def write_raw_corpus(
    out_dir: str | Path, records: Sequence[dict], bibliography: dict[str, str]
) -> tuple[Path, Path]:
    """Write raw records as JSONL plus the bibliography JSON; returns both
    paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    papers_path = out_dir / "raw_papers.jsonl"
    with papers_path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False))
            fh.write("\n")
    bib_path = out_dir / "bibliography.json"
    bib_path.write_text(json.dumps(bibliography, indent=2, sort_keys=True))
    return papers_path, bib_path
