"""Deterministic noun-phrase chunking for keyword candidates.

A small lexicon-driven tagger marks each token as chunkable (nouns and
adjectives) or as a boundary (determiners, verbs, function words, adverbs,
punctuation, bare numbers).  Candidate keywords are the maximal chunkable
runs; articles sit outside runs, so leading articles never appear in a
chunk.  This trades tagging accuracy for reproducibility: the same text
always yields the same candidates.
"""
from __future__ import annotations

import re

_WORD_RE = re.compile(r"\[\]|[A-Za-z0-9]+(?:[-'’][A-Za-z0-9]+)*|[^\sA-Za-z0-9]")

_DETERMINERS = {
    "a", "an", "the", "this", "that", "these", "those", "some", "any",
    "each", "every", "no", "all", "both", "another", "either", "neither",
    "its", "our", "their", "his", "her", "my", "your", "such", "several",
    "many", "much", "few", "more", "most",
}

_FUNCTION_WORDS = {
    # prepositions / conjunctions
    "of", "in", "on", "at", "by", "for", "with", "from", "to", "into",
    "over", "under", "between", "among", "within", "without", "through",
    "during", "against", "across", "per", "via", "and", "or", "but",
    "nor", "so", "yet", "because", "although", "while", "if", "when",
    "than", "as", "since", "whether", "where", "how", "why",
    # pronouns
    "it", "they", "we", "you", "he", "she", "i", "them", "us", "him",
    "who", "whom", "which", "what", "whose", "there", "here", "one",
    "that's", "it's",
    # particles / connectives
    "not", "also", "then", "thus", "hence", "however", "moreover",
    "therefore", "furthermore", "still", "instead", "rather", "e.g",
    "i.e", "etc",
}

_VERB_BASES = [
    "propose", "present", "show", "use", "apply", "train", "evaluate",
    "predict", "demonstrate", "outperform", "achieve", "improve",
    "compare", "introduce", "describe", "develop", "examine", "explore",
    "investigate", "adopt", "extend", "observe", "suggest", "indicate",
    "perform", "obtain", "provide", "consider", "require", "follow",
    "extract", "generate", "select", "assess", "reveal", "confirm",
    "remain", "exceed", "surpass", "employ", "rely", "leverage",
    "combine", "build", "learn", "cite", "discuss", "note", "argue",
    "focus", "yield", "enable", "contain", "include",
]

_IRREGULAR_VERBS = {
    "is", "are", "was", "were", "be", "been", "being", "am",
    "has", "have", "had", "do", "does", "did", "done",
    "can", "could", "will", "would", "shall", "should", "may", "might",
    "must", "shown", "known", "built", "made", "make", "makes", "found", "find",
    "finds", "gave", "give", "gives", "given", "took", "take", "takes",
    "taken", "see", "sees", "seen", "saw",
}

_LY_NOUN_EXCEPTIONS = {"family", "assembly", "anomaly", "supply", "monopoly"}

# -ed/-ing words that are ordinary nouns in scientific prose.
_NOMINAL_ED_ING = {
    "training", "learning", "embedding", "embeddings", "modeling",
    "modelling", "processing", "clustering", "encoding", "decoding",
    "sampling", "finding", "findings", "setting", "settings", "ranking",
    "rankings", "building", "meaning", "speed", "seed", "feed",
}


def _s_form(base: str) -> str:
    if base.endswith("y") and len(base) > 1 and base[-2] not in "aeiou":
        return base[:-1] + "ies"
    if base.endswith(("s", "x", "z", "ch", "sh")):
        return base + "es"
    return base + "s"


_VERBS = set(_IRREGULAR_VERBS)
for _base in _VERB_BASES:
    _VERBS.add(_base)
    _VERBS.add(_s_form(_base))

_CHUNK, _BOUNDARY, _PARTICIPLE = "chunk", "boundary", "participle"


def _provisional_tag(token: str) -> str:
    lower = token.lower()
    if not token[0].isalnum():
        return _BOUNDARY
    if token.isdigit() or (len(token) == 1 and token.isalpha()):
        return _BOUNDARY
    if lower in _DETERMINERS or lower in _FUNCTION_WORDS or lower in _VERBS:
        return _BOUNDARY
    if lower in _NOMINAL_ED_ING:
        return _CHUNK
    if lower.endswith("ly") and len(lower) > 3 and lower not in _LY_NOUN_EXCEPTIONS:
        return _BOUNDARY
    if lower.endswith(("ed", "ing")) and len(lower) > 3:
        return _PARTICIPLE
    return _CHUNK


def _tag_tokens(tokens: list[str]) -> list[str]:
    tags = [_provisional_tag(t) for t in tokens]
    # Participles act as modifiers before nominal material, verbs otherwise.
    for i in range(len(tags) - 1, -1, -1):
        if tags[i] == _PARTICIPLE:
            tags[i] = _CHUNK if i + 1 < len(tags) and tags[i + 1] == _CHUNK else _BOUNDARY
    return tags


def extract_candidate_keywords(text: str) -> list[str]:
    """Noun-phrase candidate keywords in first-occurrence order.

    Case-preserving; duplicates (after lowercasing) are dropped.
    """
    tokens = _WORD_RE.findall(text)
    tags = _tag_tokens(tokens)
    chunks: list[str] = []
    seen: set[str] = set()
    current: list[str] = []
    for token, tag in zip(tokens + [""], tags + [_BOUNDARY]):
        if tag == _CHUNK:
            current.append(token)
            continue
        if current:
            phrase = " ".join(current)
            if phrase.lower() not in seen:
                seen.add(phrase.lower())
                chunks.append(phrase)
            current = []
    return chunks
