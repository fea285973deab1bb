"""Paper corpus: parsing, sentence segmentation, citation-mention detection,
and line-delimited persistence.

Records are stored one JSON object per line so corpora can be streamed at
scale.  Citation markers in stored sentences are normalized to the literal
placeholder "[]" so training targets and generated sentences share a marker
vocabulary.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Mapping

logger = logging.getLogger(__name__)

CITATION_PLACEHOLDER = "[]"

# Generic numeric bracket citations, e.g. "[3]" or "[1, 4]".
_BRACKET_CITATION_RE = re.compile(r"\[\d+(?:\s*,\s*\d+)*\]")

# Words before a period that do not end a sentence.  Lowercased, final dot
# stripped; "e.g" keeps its internal dot.
_ABBREVIATIONS = {
    "al", "e.g", "i.e", "fig", "figs", "eq", "eqs", "sec", "secs",
    "ref", "refs", "no", "vol", "pp", "cf", "vs", "dr", "mr", "mrs",
    "ms", "prof", "st",
}
_CLOSERS = "\"')]}”’»"


class RecordError(ValueError):
    """A raw paper record failed validation."""


class MissingIdError(RecordError):
    pass


class MissingTitleError(RecordError):
    pass


@dataclass(frozen=True)
class BodySection:
    section_title: str
    sentences: tuple[str, ...]


@dataclass(frozen=True)
class PaperRecord:
    paper_id: str
    title: str
    abstract: str = ""
    body: tuple[BodySection, ...] = ()
    year: int | None = None
    domains: tuple[str, ...] = ()

    def body_sentences(self) -> list[str]:
        return [s for section in self.body for s in section.sentences]


@dataclass(frozen=True)
class CitationMention:
    citing_paper_id: str
    sentence_index: tuple[int, int]  # (section index, sentence index)
    cited_paper_ids: tuple[str, ...]
    marker_span: tuple[int, int] | None = None  # offsets in the raw sentence


def split_sentences(text: str) -> list[str]:
    """Rule-based sentence segmentation on terminal punctuation.

    Splits after ".", "!" or "?" (plus trailing quotes/brackets) when followed
    by whitespace and an uppercase letter or digit, except after known
    abbreviations and single-letter uppercase initials.  The returned sentences
    are trimmed slices of the input, so every non-whitespace character is
    preserved in order.
    """
    if not text:
        return []
    boundaries = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in ".!?":
            end = i + 1
            while end < n and text[end] in _CLOSERS:
                end += 1
            j = end
            while j < n and text[j].isspace():
                j += 1
            if j > end and j < n and (text[j].isupper() or text[j].isdigit()):
                if not (ch == "." and _is_abbreviation(text, i)):
                    boundaries.append(end)
        i += 1
    sentences = []
    start = 0
    for b in boundaries + [n]:
        piece = text[start:b].strip()
        if piece:
            sentences.append(piece)
        start = b
    return sentences


def _is_abbreviation(text: str, dot_index: int) -> bool:
    start = dot_index
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    word = text[start:dot_index].lstrip("\"'([{“‘«")
    if not word:
        return False
    if len(word) == 1 and word.isupper():
        return True
    return word.lower() in _ABBREVIATIONS


def parse_paper_record(raw: Mapping) -> PaperRecord:
    """Validate a raw structured document and segment its body into sentences.

    Body sections may carry pre-segmented ``sentences``, a list of
    ``paragraphs``, or a single ``text`` blob; the latter two are run through
    :func:`split_sentences`.

    Raises :class:`MissingIdError` / :class:`MissingTitleError` on records
    without an id or title.
    """
    paper_id = str(raw.get("paper_id") or raw.get("id") or "").strip()
    if not paper_id:
        raise MissingIdError("record has no paper id")
    title = str(raw.get("title") or "").strip()
    if not title:
        raise MissingTitleError(f"record {paper_id!r} has no title")

    sections = []
    for raw_section in raw.get("body") or []:
        section_title = str(raw_section.get("section_title") or "").strip()
        if "sentences" in raw_section:
            sentences = [s for s in (str(x).strip() for x in raw_section["sentences"]) if s]
        else:
            paragraphs = raw_section.get("paragraphs")
            if paragraphs is None:
                paragraphs = [raw_section.get("text") or ""]
            sentences = [s for p in paragraphs for s in split_sentences(str(p))]
        sections.append(BodySection(section_title=section_title, sentences=tuple(sentences)))

    year = raw.get("year")
    return PaperRecord(
        paper_id=paper_id,
        title=title,
        abstract=str(raw.get("abstract") or "").strip(),
        body=tuple(sections),
        year=int(year) if year is not None else None,
        domains=tuple(str(d) for d in raw.get("domains") or ()),
    )


def _find_markers(sentence: str, bibliography: Mapping[str, object]) -> list[tuple[int, int, str]]:
    """Non-overlapping bibliography-marker hits as (start, end, marker),
    matching longer markers first."""
    hits: list[tuple[int, int, str]] = []
    taken: list[tuple[int, int]] = []

    def overlaps(start: int, end: int) -> bool:
        return any(start < t_end and t_start < end for t_start, t_end in taken)

    for marker in sorted(bibliography, key=len, reverse=True):
        if not marker:
            continue
        pos = sentence.find(marker)
        while pos != -1:
            end = pos + len(marker)
            if not overlaps(pos, end):
                hits.append((pos, end, marker))
                taken.append((pos, end))
            pos = sentence.find(marker, end)
    hits.sort()
    return hits


def _resolve(marker: str, bibliography: Mapping[str, object]) -> list[str]:
    target = bibliography[marker]
    if isinstance(target, str):
        return [target]
    return [str(t) for t in target]


def detect_citation_mentions(
    paper: PaperRecord, bibliography: Mapping[str, object]
) -> list[CitationMention]:
    """One mention per sentence containing at least one resolvable marker.

    ``cited_paper_ids`` lists the distinct resolved targets in order of
    appearance; ``marker_span`` covers the first marker in the raw sentence.
    Bracket-style citations that are not in the bibliography are logged and
    skipped.
    """
    mentions = []
    for sec_idx, section in enumerate(paper.body):
        for sent_idx, sentence in enumerate(section.sentences):
            hits = _find_markers(sentence, bibliography)
            for match in _BRACKET_CITATION_RE.finditer(sentence):
                span = (match.start(), match.end())
                if not any(h[0] < span[1] and span[0] < h[1] for h in hits):
                    logger.warning(
                        "unresolvable citation marker %r in %s (%d, %d); skipped",
                        match.group(), paper.paper_id, sec_idx, sent_idx,
                    )
            if not hits:
                continue
            cited: list[str] = []
            for _, _, marker in hits:
                for pid in _resolve(marker, bibliography):
                    if pid not in cited:
                        cited.append(pid)
            mentions.append(
                CitationMention(
                    citing_paper_id=paper.paper_id,
                    sentence_index=(sec_idx, sent_idx),
                    cited_paper_ids=tuple(cited),
                    marker_span=(hits[0][0], hits[0][1]),
                )
            )
    return mentions


def normalize_citation_markers(
    paper: PaperRecord, bibliography: Mapping[str, object]
) -> PaperRecord:
    """Replace every resolvable citation marker with the "[]" placeholder."""
    sections = []
    for section in paper.body:
        sentences = []
        for sentence in section.sentences:
            hits = _find_markers(sentence, bibliography)
            for start, end, _ in reversed(hits):
                sentence = sentence[:start] + CITATION_PLACEHOLDER + sentence[end:]
            sentences.append(sentence)
        sections.append(BodySection(section.section_title, tuple(sentences)))
    return replace(paper, body=tuple(sections))


@dataclass
class IngestReport:
    n_papers: int = 0
    n_mentions: int = 0
    diagnostics: list[str] = field(default_factory=list)


class Corpus:
    """In-memory corpus keyed by paper id, with per-citing-paper mentions."""

    def __init__(self) -> None:
        self.papers: dict[str, PaperRecord] = {}
        self.mentions: dict[str, list[CitationMention]] = {}

    def __len__(self) -> int:
        return len(self.papers)

    def __contains__(self, paper_id: str) -> bool:
        return paper_id in self.papers

    def get(self, paper_id: str) -> PaperRecord | None:
        return self.papers.get(paper_id)

    def add(self, record: PaperRecord, mentions: Iterable[CitationMention] = ()) -> None:
        if record.paper_id in self.papers:
            raise ValueError(f"duplicate paper id {record.paper_id!r}")
        self.papers[record.paper_id] = record
        self.mentions[record.paper_id] = list(mentions)

    def all_mentions(self) -> Iterator[CitationMention]:
        for paper_id in self.papers:
            yield from self.mentions[paper_id]

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as fh:
            for paper_id, record in self.papers.items():
                fh.write(json.dumps(
                    _record_to_json(record, self.mentions.get(paper_id, [])),
                    ensure_ascii=False,
                ))
                fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "Corpus":
        corpus = cls()
        for record, mentions in iter_corpus_file(path):
            corpus.add(record, mentions)
        return corpus


def _record_to_json(record: PaperRecord, mentions: list[CitationMention]) -> dict:
    return {
        "paper_id": record.paper_id,
        "title": record.title,
        "abstract": record.abstract,
        "year": record.year,
        "domains": list(record.domains),
        "body": [
            {"section_title": s.section_title, "sentences": list(s.sentences)}
            for s in record.body
        ],
        "mentions": [
            {
                "section_idx": m.sentence_index[0],
                "sentence_idx": m.sentence_index[1],
                "cited_ids": list(m.cited_paper_ids),
            }
            for m in mentions
        ],
    }


def iter_corpus_file(path: str | Path) -> Iterator[tuple[PaperRecord, list[CitationMention]]]:
    """Stream (record, mentions) pairs from a line-delimited corpus file."""
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            record = PaperRecord(
                paper_id=obj["paper_id"],
                title=obj["title"],
                abstract=obj.get("abstract", ""),
                body=tuple(
                    BodySection(s["section_title"], tuple(s["sentences"]))
                    for s in obj.get("body", [])
                ),
                year=obj.get("year"),
                domains=tuple(obj.get("domains", [])),
            )
            mentions = [
                CitationMention(
                    citing_paper_id=record.paper_id,
                    sentence_index=(m["section_idx"], m["sentence_idx"]),
                    cited_paper_ids=tuple(m["cited_ids"]),
                )
                for m in obj.get("mentions", [])
            ]
            yield record, mentions


def ingest_papers(
    raw_records: Iterable[Mapping], bibliography: Mapping[str, object]
) -> tuple[Corpus, IngestReport]:
    """Parse, detect mentions, and normalize markers for a stream of raw
    records.  Invalid records are skipped with a diagnostic; the stream
    continues."""
    corpus = Corpus()
    report = IngestReport()
    for raw in raw_records:
        try:
            record = parse_paper_record(raw)
        except RecordError as exc:
            report.diagnostics.append(str(exc))
            logger.warning("record rejected: %s", exc)
            continue
        mentions = detect_citation_mentions(record, bibliography)
        normalized = normalize_citation_markers(record, bibliography)
        try:
            corpus.add(normalized, mentions)
        except ValueError as exc:
            report.diagnostics.append(str(exc))
            logger.warning("record rejected: %s", exc)
            continue
        report.n_papers += 1
        report.n_mentions += len(mentions)
    return corpus, report


def load_raw_records(path: str | Path) -> Iterator[dict]:
    """Raw records from a .jsonl file or a directory of .json files."""
    path = Path(path)
    if path.is_dir():
        for child in sorted(path.glob("*.json")):
            yield json.loads(child.read_text(encoding="utf-8"))
    else:
        with path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield json.loads(line)
