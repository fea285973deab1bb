"""Evaluation protocols for the citation generator.

Three probes: corpus-level ROUGE under different attribute sources, an
intent-controllability confusion matrix, and a paired keyword/sentence
semantic-match test judged by a neutral sentence encoder.
"""
from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import torch

from .dataset import EMPTY_ATTRIBUTES, CitationAttributes, CitationInstance, ContextBundle
from .encoder import TinyTextEncoder
from .oracle import INTENTS
from .rouge import mean_scores
from .suggester import cosine

logger = logging.getLogger(__name__)

# generate_fn(attributes, context) -> generated sentence
GenerateFn = Callable[[CitationAttributes, ContextBundle], str]
# attribute_fn(instance) -> attributes to condition on
AttributeFn = Callable[[CitationInstance], CitationAttributes]


@dataclass(frozen=True)
class AblationFlags:
    """Which attribute fields stay visible to the generator."""

    use_intent: bool = True
    use_keywords: bool = True
    use_sentences: bool = True

    def apply(self, attributes: CitationAttributes) -> CitationAttributes:
        return CitationAttributes(
            intent=attributes.intent if self.use_intent else "",
            keywords=attributes.keywords if self.use_keywords else (),
            sentences=attributes.sentences if self.use_sentences else (),
        )


FULL_ATTRIBUTES = AblationFlags()
NO_ATTRIBUTES = AblationFlags(use_intent=False, use_keywords=False, use_sentences=False)


def oracle_attribute_fn(instance: CitationInstance) -> CitationAttributes:
    return instance.attributes if instance.attributes is not None else EMPTY_ATTRIBUTES


@dataclass
class EvalRow:
    system: str
    mode: str
    flags: AblationFlags
    rouge1: float
    rouge2: float
    rougeL: float
    n: int

    def as_dict(self) -> dict:
        return {
            "system": self.system,
            "mode": self.mode,
            "use_intent": self.flags.use_intent,
            "use_keywords": self.flags.use_keywords,
            "use_sentences": self.flags.use_sentences,
            "rouge1": self.rouge1,
            "rouge2": self.rouge2,
            "rougeL": self.rougeL,
            "n": self.n,
        }


@dataclass
class EvalReport:
    mode: str
    rows: list[EvalRow] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"mode": self.mode, "rows": [row.as_dict() for row in self.rows]}


def eval_mode(
    instances: Sequence[CitationInstance],
    generate_fn: GenerateFn,
    attribute_fn: AttributeFn,
    flags: AblationFlags = FULL_ATTRIBUTES,
    system: str = "generator",
    mode: str = "controlled",
    limit: int | None = None,
) -> EvalRow:
    """Generate one sentence per instance and report mean ROUGE-1/2/L F1 in
    percent against the reference citing sentences.

    ``attribute_fn`` supplies the conditioning attributes (oracle labels for
    the controlled mode, suggester output for the automatic mode) and
    ``flags`` blanks individual fields for ablation rows.
    """
    subset = list(instances[:limit]) if limit is not None else list(instances)
    outputs = [
        generate_fn(flags.apply(attribute_fn(instance)), instance.context)
        for instance in subset
    ]
    references = [instance.target_sentence for instance in subset]
    means = mean_scores(outputs, references)
    return EvalRow(
        system=system,
        mode=mode,
        flags=flags,
        rouge1=means["rouge1"],
        rouge2=means["rouge2"],
        rougeL=means["rougeL"],
        n=len(subset),
    )


def render_eval_table(report: EvalReport) -> str:
    """Plain-text table: one row per system/ablation, blanked fields shown
    as '--' in the attribute columns."""
    header = f"{'system':<28} {'int':>4} {'kw':>4} {'sent':>4} {'R-1':>7} {'R-2':>7} {'R-L':>7} {'n':>6}"
    lines = [f"mode: {report.mode}", header, "-" * len(header)]
    for row in report.rows:
        marks = [
            "+" if flag else "--"
            for flag in (row.flags.use_intent, row.flags.use_keywords, row.flags.use_sentences)
        ]
        lines.append(
            f"{row.system:<28} {marks[0]:>4} {marks[1]:>4} {marks[2]:>4} "
            f"{row.rouge1:>7.2f} {row.rouge2:>7.2f} {row.rougeL:>7.2f} {row.n:>6d}"
        )
    return "\n".join(lines)


@dataclass
class ConfusionMatrix:
    """Counts indexed [assigned intent][classified intent], row order and
    column order both following the canonical intent list."""

    labels: tuple[str, ...] = INTENTS
    counts: np.ndarray = field(default_factory=lambda: np.zeros((3, 3), dtype=np.int64))

    def add(self, assigned: str, classified: str) -> None:
        self.counts[self.labels.index(assigned), self.labels.index(classified)] += 1

    def frequencies(self) -> np.ndarray:
        freq = np.zeros_like(self.counts, dtype=np.float64)
        for i, row in enumerate(self.counts):
            total = row.sum()
            if total > 0:
                freq[i] = row / total
        return freq

    def diagonal_is_row_max(self) -> bool:
        """True when the diagonal entry strictly exceeds the off-diagonal
        entries in every row with data."""
        for i, row in enumerate(self.counts):
            if row.sum() == 0:
                return False
            if any(row[j] >= row[i] for j in range(len(row)) if j != i):
                return False
        return True

    def as_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "counts": self.counts.tolist(),
            "frequencies": self.frequencies().tolist(),
        }


def intent_controllability(
    instances: Sequence[CitationInstance],
    generate_fn: GenerateFn,
    classify_fn: Callable[[str], str],
    attribute_fn: AttributeFn = oracle_attribute_fn,
    limit: int | None = None,
) -> ConfusionMatrix:
    """For each instance, substitute each of the three intents into its
    attributes (keywords and sentences unchanged), generate, and classify
    the output; returns the assigned-vs-classified count matrix."""
    subset = list(instances[:limit]) if limit is not None else list(instances)
    matrix = ConfusionMatrix()
    for instance in subset:
        base = attribute_fn(instance)
        for intent in INTENTS:
            generated = generate_fn(replace(base, intent=intent), instance.context)
            matrix.add(intent, classify_fn(generated))
    return matrix


def render_confusion_matrix(matrix: ConfusionMatrix) -> str:
    freq = matrix.frequencies()
    width = max(len(label) for label in matrix.labels)
    header = " " * (width + 2) + "  ".join(f"{label:>10}" for label in matrix.labels)
    lines = ["assigned intent (rows) vs classified intent (columns)", header]
    for i, label in enumerate(matrix.labels):
        cells = "  ".join(
            f"{freq[i, j]:>6.3f}({matrix.counts[i, j]:>2d})" for j in range(len(matrix.labels))
        )
        lines.append(f"{label:<{width}}  {cells}")
    return "\n".join(lines)


@dataclass
class MatchRateReport:
    kind: str
    matches: int = 0
    trials: int = 0
    skipped: int = 0

    @property
    def frequency(self) -> float:
        return self.matches / self.trials if self.trials else 0.0

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "matches": self.matches,
            "trials": self.trials,
            "skipped": self.skipped,
            "frequency": self.frequency,
            "wilson_lower_95": wilson_lower_bound(self.matches, self.trials),
        }


def _attributes_with(kind: str, base: CitationAttributes, value: str) -> CitationAttributes:
    if kind == "keyword":
        return replace(base, keywords=(value,))
    if kind == "sentence":
        return replace(base, sentences=(value,))
    raise ValueError(f"unknown attribute kind {kind!r}")


def attribute_match_rate(
    instances: Sequence[CitationInstance],
    generate_fn: GenerateFn,
    judge: TinyTextEncoder,
    candidates_fn: Callable[[CitationInstance], Sequence[str]],
    kind: str = "keyword",
    attribute_fn: AttributeFn = oracle_attribute_fn,
    seed: int = 0,
    limit: int | None = None,
) -> MatchRateReport:
    """Paired semantic-match test for one attribute kind.

    Per instance two distinct candidates A and B are sampled from
    ``candidates_fn`` (the top suggestions in real use); the generator runs
    once conditioned on A and once on B with the other fields fixed.  Each
    generation is a trial: it matches when its output is closer under the
    judge encoder's cosine to its own conditioning candidate than to the
    alternative.  Instances offering fewer than two candidates are skipped.
    """
    subset = list(instances[:limit]) if limit is not None else list(instances)
    rng = random.Random(seed)
    report = MatchRateReport(kind=kind)
    for instance in subset:
        candidates = list(dict.fromkeys(candidates_fn(instance)))
        if len(candidates) < 2:
            report.skipped += 1
            continue
        cand_a, cand_b = rng.sample(candidates, 2)
        base = attribute_fn(instance)
        for own, other in ((cand_a, cand_b), (cand_b, cand_a)):
            generated = generate_fn(_attributes_with(kind, base, own), instance.context)
            with torch.no_grad():
                vectors = judge.embed_texts([generated, own, other]).numpy()
            try:
                closer_to_own = cosine(vectors[0], vectors[1]) > cosine(vectors[0], vectors[2])
            except ValueError:
                closer_to_own = False
            report.trials += 1
            if closer_to_own:
                report.matches += 1
    return report


def macro_f1(
    y_true: Sequence[str], y_pred: Sequence[str], labels: Sequence[str]
) -> float:
    """Unweighted mean of per-class F1 over ``labels``."""
    if len(y_true) != len(y_pred):
        raise ValueError("y_true and y_pred must be aligned")
    total = 0.0
    for label in labels:
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == label and p == label)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != label and p == label)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == label and p != label)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        total += 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return total / len(labels)


def wilson_lower_bound(successes: int, trials: int, z: float = 1.6448536269514722) -> float:
    """One-sided lower confidence bound for a binomial proportion (Wilson
    score interval); the default z gives 95% confidence."""
    if trials == 0:
        return 0.0
    p_hat = successes / trials
    denom = 1.0 + z * z / trials
    center = p_hat + z * z / (2 * trials)
    spread = z * math.sqrt((p_hat * (1.0 - p_hat) + z * z / (4 * trials)) / trials)
    return (center - spread) / denom
