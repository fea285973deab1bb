"""Build the synthetic desk-study corpus and normalize it in one pass.

Writes the raw paper dump, the bibliography, the intent-labeled sentence
sets, and the ingested corpus file that every later stage consumes.  The
same artifacts fall out of `citegen pipeline`; this script exists for
iterating on corpus parameters without rerunning the model stages.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from citegen.corpus import ingest_papers, load_raw_records
from citegen.synthetic import (
    DeskCorpusConfig,
    build_desk_corpus,
    build_intent_corpus,
    write_raw_corpus,
)
from citegen.oracle import save_intent_examples


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--topics", type=int, default=12)
    parser.add_argument("--train-citing", type=int, default=48)
    parser.add_argument("--eval-citing", type=int, default=52)
    parser.add_argument("--intent-per-class", type=int, default=150)
    parser.add_argument("--intent-unworthy", type=int, default=150)
    parser.add_argument("--holdout-fraction", type=float, default=0.2)
    args = parser.parse_args()

    config = DeskCorpusConfig(
        n_topics=args.topics,
        train_citing_papers=args.train_citing,
        eval_citing_papers=args.eval_citing,
        seed=args.seed,
    )
    records, bibliography = build_desk_corpus(config)
    papers_path, bib_path = write_raw_corpus(args.out, records, bibliography)
    print(f"raw papers: {len(records)} -> {papers_path}")
    print(f"bibliography markers: {len(bibliography)} -> {bib_path}")

    corpus, report = ingest_papers(
        load_raw_records(papers_path), json.loads(bib_path.read_text())
    )
    corpus_path = args.out / "corpus.jsonl"
    corpus.save(corpus_path)
    print(f"ingested: {report.n_papers} papers, {report.n_mentions} mentions -> {corpus_path}")
    for diagnostic in report.diagnostics:
        print(f"  skipped: {diagnostic}")

    examples = build_intent_corpus(
        args.intent_per_class, args.intent_unworthy, seed=args.seed + 1
    )
    cut = int(len(examples) * (1.0 - args.holdout_fraction))
    save_intent_examples(args.out / "intent_train.jsonl", examples[:cut])
    save_intent_examples(args.out / "intent_test.jsonl", examples[cut:])
    print(f"intent examples: {cut} train, {len(examples) - cut} held out")


if __name__ == "__main__":
    main()
