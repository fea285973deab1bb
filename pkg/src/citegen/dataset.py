"""Build filtered, context-assembled, decoupled citation datasets from a corpus.

An instance pairs one citation sentence (the target, with its marker
normalized to "[]") with its context bundle: up to ``n_context_sentences``
preceding same-section sentences plus the cited paper's title and abstract.
Train/validation/test splits are decoupled so no citing or cited paper is
shared across splits.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import Corpus

logger = logging.getLogger(__name__)

TRAIN, VALIDATION, TEST = "train", "validation", "test"
SPLITS = (TRAIN, VALIDATION, TEST)
# Conflicts are resolved against the higher-priority split so evaluation
# data is preserved; training instances are dropped first.
_SPLIT_PRIORITY = {TEST: 0, VALIDATION: 1, TRAIN: 2}


@dataclass(frozen=True)
class DatasetConfig:
    n_context_sentences: int = 5
    min_words: int = 5
    max_words: int = 200
    train_year_range: tuple[int, int] = (2000, 2020)
    min_citing_sentences: int = 50
    domain_filter: tuple[str, ...] = ()
    eval_year: int | None = None  # citing papers from this year go to validation/test

    def __post_init__(self) -> None:
        if self.n_context_sentences < 1:
            raise ValueError("n_context_sentences must be >= 1")
        if self.min_words >= self.max_words:
            raise ValueError("min_words must be < max_words")
        if self.min_citing_sentences < 1:
            raise ValueError("min_citing_sentences must be >= 1")

    @classmethod
    def from_dict(cls, obj: Mapping) -> "DatasetConfig":
        kwargs = dict(obj)
        if "train_year_range" in kwargs:
            kwargs["train_year_range"] = tuple(kwargs["train_year_range"])
        if "domain_filter" in kwargs:
            kwargs["domain_filter"] = tuple(kwargs["domain_filter"])
        return cls(**kwargs)


@dataclass(frozen=True)
class ContextBundle:
    local_context: tuple[str, ...]
    cited_title: str
    cited_abstract: str

    def contextual_text(self) -> str:
        """Local and global context as one text, the query for attribute
        suggestion and keyword candidate chunking."""
        parts = list(self.local_context) + [self.cited_title, self.cited_abstract]
        return " ".join(p for p in parts if p)


@dataclass(frozen=True)
class CitationAttributes:
    """The condition C: each attribute may be absent."""

    intent: str | None = None
    keywords: tuple[str, ...] = ()
    sentences: tuple[str, ...] = ()

    def is_empty(self) -> bool:
        return self.intent is None and not self.keywords and not self.sentences


EMPTY_ATTRIBUTES = CitationAttributes()


@dataclass(frozen=True)
class CitationInstance:
    instance_id: str
    citing_paper_id: str
    cited_paper_id: str
    target_sentence: str
    context: ContextBundle
    section_title: str = ""
    attributes: CitationAttributes | None = None

    def with_attributes(self, attributes: CitationAttributes) -> "CitationInstance":
        return replace(self, attributes=attributes)


@dataclass
class SplitManifest:
    assignment: dict[str, str]  # instance_id -> split
    citing_by_split: dict[str, set[str]] = field(default_factory=dict)
    cited_by_split: dict[str, set[str]] = field(default_factory=dict)
    dropped: list[str] = field(default_factory=list)

    def instances_for(self, instances: Sequence[CitationInstance], split: str) -> list[CitationInstance]:
        return [i for i in instances if self.assignment.get(i.instance_id) == split]


@dataclass(frozen=True)
class DecouplingViolation:
    instance_a: str
    instance_b: str
    shared_paper_id: str
    kind: str  # "citing" or "cited"


def word_count(sentence: str) -> int:
    return len(sentence.split())


def filter_training_cited_papers(corpus: Corpus, config: DatasetConfig) -> set[str]:
    """Cited-paper ids within the year range and domain filter that are cited
    in at least ``min_citing_sentences`` distinct sentences."""
    citing_sentences: dict[str, set[tuple[str, int, int]]] = {}
    for mention in corpus.all_mentions():
        key = (mention.citing_paper_id, *mention.sentence_index)
        for cited_id in mention.cited_paper_ids:
            citing_sentences.setdefault(cited_id, set()).add(key)

    lo, hi = config.train_year_range
    eligible = set()
    for cited_id, sentences in citing_sentences.items():
        paper = corpus.get(cited_id)
        if paper is None or paper.year is None:
            continue
        if not lo <= paper.year <= hi:
            continue
        if config.domain_filter and not set(paper.domains) & set(config.domain_filter):
            continue
        if len(sentences) >= config.min_citing_sentences:
            eligible.add(cited_id)
    return eligible


def build_instances(
    corpus: Corpus,
    eligible_cited_ids: set[str] | None,
    config: DatasetConfig,
) -> list[CitationInstance]:
    """One instance per (citation sentence, its single cited paper).

    Sentences citing two or more distinct papers are dropped, as are targets
    outside the [min_words, max_words] range and mentions whose cited paper
    is absent from the corpus.  ``eligible_cited_ids=None`` means all cited
    papers are eligible (validation/test construction).
    """
    instances = []
    for mention in corpus.all_mentions():
        if len(mention.cited_paper_ids) != 1:
            continue
        cited_id = mention.cited_paper_ids[0]
        if eligible_cited_ids is not None and cited_id not in eligible_cited_ids:
            continue
        citing = corpus.get(mention.citing_paper_id)
        cited = corpus.get(cited_id)
        if cited is None:
            logger.warning(
                "cited paper %s missing from corpus; instance from %s dropped",
                cited_id, mention.citing_paper_id,
            )
            continue
        sec_idx, sent_idx = mention.sentence_index
        section = citing.body[sec_idx]
        target = section.sentences[sent_idx]
        if not config.min_words <= word_count(target) <= config.max_words:
            continue
        window_start = max(0, sent_idx - config.n_context_sentences)
        context = ContextBundle(
            local_context=tuple(section.sentences[window_start:sent_idx]),
            cited_title=cited.title,
            cited_abstract=cited.abstract,
        )
        instances.append(
            CitationInstance(
                instance_id=f"{citing.paper_id}:{sec_idx}.{sent_idx}->{cited_id}",
                citing_paper_id=citing.paper_id,
                cited_paper_id=cited_id,
                target_sentence=target,
                context=context,
                section_title=section.section_title,
            )
        )
    return instances


def assign_by_year(
    instances: Sequence[CitationInstance], corpus: Corpus, config: DatasetConfig
) -> dict[str, str]:
    """Initial split assignment: citing papers from ``eval_year`` alternate
    between test and validation (whole papers, so instances from one citing
    paper stay together); everything else is training data."""
    eval_citing = sorted(
        {
            i.citing_paper_id
            for i in instances
            if config.eval_year is not None
            and (paper := corpus.get(i.citing_paper_id)) is not None
            and paper.year == config.eval_year
        }
    )
    eval_split = {
        pid: TEST if pos % 2 == 0 else VALIDATION for pos, pid in enumerate(eval_citing)
    }
    return {
        i.instance_id: eval_split.get(i.citing_paper_id, TRAIN) for i in instances
    }


def decouple_splits(
    instances: Sequence[CitationInstance], initial_assignment: Mapping[str, str]
) -> SplitManifest:
    """Enforce the decoupling rule: across splits, no two instances share a
    citing paper or a cited paper.

    Conflicts are resolved by split priority (test, then validation, then
    train): the lower-priority instance is dropped.  Deterministic given the
    input ordering.
    """
    manifest = SplitManifest(assignment={})
    claimed_citing: dict[str, str] = {}
    claimed_cited: dict[str, str] = {}
    for split in sorted(SPLITS, key=_SPLIT_PRIORITY.get):
        for instance in instances:
            if initial_assignment.get(instance.instance_id) != split:
                continue
            citing_owner = claimed_citing.get(instance.citing_paper_id)
            cited_owner = claimed_cited.get(instance.cited_paper_id)
            if (citing_owner not in (None, split)) or (cited_owner not in (None, split)):
                manifest.dropped.append(instance.instance_id)
                continue
            claimed_citing[instance.citing_paper_id] = split
            claimed_cited[instance.cited_paper_id] = split
            manifest.assignment[instance.instance_id] = split
            manifest.citing_by_split.setdefault(split, set()).add(instance.citing_paper_id)
            manifest.cited_by_split.setdefault(split, set()).add(instance.cited_paper_id)
    return manifest


def audit_decoupling(
    manifest: SplitManifest, instances: Sequence[CitationInstance]
) -> list[DecouplingViolation]:
    """Empty iff the decoupling property holds; otherwise one violation per
    offending cross-split pair."""
    by_id = {i.instance_id: i for i in instances}
    citing_index: dict[str, list[tuple[str, str]]] = {}
    cited_index: dict[str, list[tuple[str, str]]] = {}
    for instance_id, split in manifest.assignment.items():
        instance = by_id.get(instance_id)
        if instance is None:
            continue
        citing_index.setdefault(instance.citing_paper_id, []).append((instance_id, split))
        cited_index.setdefault(instance.cited_paper_id, []).append((instance_id, split))

    violations = []
    for kind, index in (("citing", citing_index), ("cited", cited_index)):
        for paper_id, members in index.items():
            for pos, (id_a, split_a) in enumerate(members):
                for id_b, split_b in members[pos + 1 :]:
                    if split_a != split_b:
                        violations.append(
                            DecouplingViolation(id_a, id_b, paper_id, kind)
                        )
    return violations


def prepare_dataset(
    corpus: Corpus, config: DatasetConfig
) -> tuple[SplitManifest, list[CitationInstance], dict]:
    """Full dataset construction: build instances, assign splits by year,
    restrict training to sufficiently-cited papers, and decouple.

    The citation-count eligibility filter applies to training instances
    only; evaluation-year instances keep every cited paper.  Returns the
    manifest, the instances, and per-split statistics.
    """
    instances = build_instances(corpus, None, config)
    initial = assign_by_year(instances, corpus, config)
    eligible = filter_training_cited_papers(corpus, config)
    kept = [
        i
        for i in instances
        if initial[i.instance_id] != TRAIN or i.cited_paper_id in eligible
    ]
    dropped_ineligible = len(instances) - len(kept)
    if dropped_ineligible:
        logger.info(
            "dropped %d training instances citing papers below the citation threshold",
            dropped_ineligible,
        )
    manifest = decouple_splits(kept, initial)
    stats = dataset_statistics(manifest, kept)
    stats["_dropped_ineligible_train"] = dropped_ineligible
    stats["_dropped_decoupling"] = len(manifest.dropped)
    return manifest, kept, stats


def dataset_statistics(
    manifest: SplitManifest, instances: Sequence[CitationInstance]
) -> dict[str, dict]:
    """Per-split counts of cited/citing papers, citation sentences, and
    intents (when attributes are populated)."""
    stats: dict[str, dict] = {}
    by_id = {i.instance_id: i for i in instances}
    for split in SPLITS:
        members = [
            by_id[iid]
            for iid, s in manifest.assignment.items()
            if s == split and iid in by_id
        ]
        intents: dict[str, int] = {}
        for instance in members:
            if instance.attributes and instance.attributes.intent:
                intents[instance.attributes.intent] = intents.get(instance.attributes.intent, 0) + 1
        stats[split] = {
            "cited_papers": len({m.cited_paper_id for m in members}),
            "citing_papers": len({m.citing_paper_id for m in members}),
            "citation_sentences": len(members),
            "intents": dict(sorted(intents.items())),
        }
    return stats


def _instance_to_json(instance: CitationInstance) -> dict:
    obj = {
        "instance_id": instance.instance_id,
        "citing_paper_id": instance.citing_paper_id,
        "cited_paper_id": instance.cited_paper_id,
        "target_sentence": instance.target_sentence,
        "section_title": instance.section_title,
        "context": {
            "local_context": list(instance.context.local_context),
            "cited_title": instance.context.cited_title,
            "cited_abstract": instance.context.cited_abstract,
        },
        "attributes": None,
    }
    if instance.attributes is not None:
        obj["attributes"] = {
            "intent": instance.attributes.intent,
            "keywords": list(instance.attributes.keywords),
            "sentences": list(instance.attributes.sentences),
        }
    return obj


def _instance_from_json(obj: Mapping) -> CitationInstance:
    attributes = None
    if obj.get("attributes") is not None:
        raw = obj["attributes"]
        attributes = CitationAttributes(
            intent=raw.get("intent"),
            keywords=tuple(raw.get("keywords", [])),
            sentences=tuple(raw.get("sentences", [])),
        )
    ctx = obj["context"]
    return CitationInstance(
        instance_id=obj["instance_id"],
        citing_paper_id=obj["citing_paper_id"],
        cited_paper_id=obj["cited_paper_id"],
        target_sentence=obj["target_sentence"],
        section_title=obj.get("section_title", ""),
        context=ContextBundle(
            local_context=tuple(ctx["local_context"]),
            cited_title=ctx["cited_title"],
            cited_abstract=ctx["cited_abstract"],
        ),
        attributes=attributes,
    )


def save_instances(path: str | Path, instances: Iterable[CitationInstance]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for instance in instances:
            fh.write(json.dumps(_instance_to_json(instance), ensure_ascii=False))
            fh.write("\n")


def load_instances(path: str | Path) -> list[CitationInstance]:
    instances = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                instances.append(_instance_from_json(json.loads(line)))
    return instances


def save_manifest(path: str | Path, manifest: SplitManifest) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for instance_id, split in manifest.assignment.items():
            fh.write(json.dumps({"instance_id": instance_id, "split": split}))
            fh.write("\n")


def load_manifest(path: str | Path) -> SplitManifest:
    assignment = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                obj = json.loads(line)
                assignment[obj["instance_id"]] = obj["split"]
    return SplitManifest(assignment=assignment)


def save_split_dataset(
    out_dir: str | Path, manifest: SplitManifest, instances: Sequence[CitationInstance]
) -> None:
    """Write the manifest plus one instance file per split."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_manifest(out_dir / "manifest.jsonl", manifest)
    for split in SPLITS:
        save_instances(out_dir / f"{split}.jsonl", manifest.instances_for(instances, split))


def load_split_dataset(dataset_dir: str | Path) -> tuple[SplitManifest, dict[str, list[CitationInstance]]]:
    dataset_dir = Path(dataset_dir)
    manifest = load_manifest(dataset_dir / "manifest.jsonl")
    splits = {}
    for split in SPLITS:
        path = dataset_dir / f"{split}.jsonl"
        splits[split] = load_instances(path) if path.exists() else []
    return manifest, splits
