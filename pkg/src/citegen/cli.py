"""Command-line workflow: corpus ingestion, dataset construction, oracle
labeling, model training, suggestion, generation, evaluation, and serving.

``pipeline`` chains every stage from a single YAML config and emits one
machine-readable report.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import fields as dataclass_fields
from pathlib import Path

import click
import torch
import yaml

from .corpus import Corpus, ingest_papers, load_raw_records
from .dataset import (
    SPLITS,
    TRAIN,
    TEST,
    VALIDATION,
    CitationAttributes,
    ContextBundle,
    DatasetConfig,
    audit_decoupling,
    load_instances,
    load_manifest,
    load_split_dataset,
    prepare_dataset,
    save_instances,
    save_manifest,
    save_split_dataset,
)
from .encoder import EncoderConfig, build_base_encoder, load_encoder, save_encoder
from .evaluation import (
    FULL_ATTRIBUTES,
    NO_ATTRIBUTES,
    AblationFlags,
    EvalReport,
    attribute_match_rate,
    eval_mode,
    intent_controllability,
    macro_f1,
    oracle_attribute_fn,
    render_confusion_matrix,
    render_eval_table,
)
from .generator import (
    GeneratorConfig,
    GeneratorTrainConfig,
    TinySeq2Seq,
    build_generator_vocab,
    load_generator,
    save_generator,
    serialize_prompt,
    train_generator,
)
from .oracle import (
    INTENTS,
    ClassifierTrainConfig,
    ScaffoldConfig,
    label_dataset,
    load_classifier,
    load_intent_examples,
    pseudo_label_intent,
    save_classifier,
    save_intent_examples,
    train_intent_classifier,
)
from .rouge import mean_scores
from .suggester import (
    ExtractorConfig,
    IntentPredictor,
    PredictorTrainConfig,
    SuggesterModels,
    TripletTrainConfig,
    build_triplet_queries,
    load_predictor,
    save_predictor,
    suggest,
    train_intent_predictor,
    triplet_fine_tune,
)
from .synthetic import (
    DeskCorpusConfig,
    build_desk_corpus,
    build_intent_corpus,
    write_raw_corpus,
)

logger = logging.getLogger(__name__)


def _load_yaml(path: str | Path) -> dict:
    return yaml.safe_load(Path(path).read_text()) or {}


def _from_mapping(cls, mapping: dict):
    """Instantiate a dataclass from a mapping, rejecting unknown keys."""
    known = {f.name for f in dataclass_fields(cls)}
    unknown = set(mapping) - known
    if unknown:
        raise click.ClickException(
            f"unknown {cls.__name__} keys: {sorted(unknown)} (known: {sorted(known)})"
        )
    return cls(**mapping)


def _corpus_texts(corpus: Corpus) -> list[str]:
    texts = []
    for paper in corpus.papers.values():
        texts.append(paper.title)
        texts.append(paper.abstract)
        texts.extend(paper.body_sentences())
    return texts


def _read_lines(path: str | Path) -> list[str]:
    return [line.strip() for line in Path(path).read_text().splitlines() if line.strip()]


def _write_report(path: str | Path | None, payload: dict) -> None:
    if path is not None:
        out = Path(path)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(payload, indent=2, sort_keys=True))


@click.group()
@click.option("--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool) -> None:
    """Controllable citation generation toolkit."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command("make-corpus")
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.option("--seed", default=0, show_default=True)
@click.option("--intent-per-class", default=150, show_default=True)
@click.option("--intent-unworthy", default=150, show_default=True)
@click.option("--holdout-fraction", default=0.2, show_default=True)
def make_corpus_cmd(out: Path, seed: int, intent_per_class: int, intent_unworthy: int, holdout_fraction: float) -> None:
    """Generate the synthetic desk corpus and intent-labeled set."""
    records, bibliography = build_desk_corpus(DeskCorpusConfig(seed=seed))
    papers_path, bib_path = write_raw_corpus(out, records, bibliography)
    examples = build_intent_corpus(intent_per_class, intent_unworthy, seed=seed + 1)
    cut = int(len(examples) * (1.0 - holdout_fraction))
    save_intent_examples(out / "intent_train.jsonl", examples[:cut])
    save_intent_examples(out / "intent_test.jsonl", examples[cut:])
    click.echo(f"wrote {len(records)} raw papers to {papers_path}")
    click.echo(f"wrote bibliography ({len(bibliography)} markers) to {bib_path}")
    click.echo(f"wrote {cut} train / {len(examples) - cut} held-out intent examples")


@main.command("ingest")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--output", required=True, type=click.Path(path_type=Path))
@click.option("--bibliography", required=True, type=click.Path(exists=True, path_type=Path))
def ingest_cmd(input_path: Path, output: Path, bibliography: Path) -> None:
    """Parse raw papers, detect citation mentions, normalize markers."""
    bib = json.loads(bibliography.read_text())
    corpus, report = ingest_papers(load_raw_records(input_path), bib)
    corpus.save(output)
    click.echo(f"ingested {report.n_papers} papers, {report.n_mentions} citation mentions")
    for diagnostic in report.diagnostics:
        click.echo(f"  skipped: {diagnostic}")


@main.command("build-dataset")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", required=True, type=click.Path(path_type=Path))
def build_dataset_cmd(corpus_path: Path, config_path: Path, out: Path) -> None:
    """Build filtered, decoupled train/validation/test splits."""
    raw = _load_yaml(config_path)
    config = DatasetConfig.from_dict(raw.get("dataset", raw))
    corpus = Corpus.load(corpus_path)
    manifest, instances, stats = prepare_dataset(corpus, config)
    save_split_dataset(out, manifest, instances)
    (out / "stats.json").write_text(json.dumps(stats, indent=2, sort_keys=True))
    for split in SPLITS:
        click.echo(f"{split}: {stats[split]['citation_sentences']} instances")
    click.echo(f"dropped (citation threshold): {stats['_dropped_ineligible_train']}")
    click.echo(f"dropped (decoupling): {stats['_dropped_decoupling']}")


@main.command("audit")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, path_type=Path))
def audit_cmd(manifest_path: Path) -> None:
    """Check the decoupling property of a saved split manifest.

    Instances are read from the split files next to the manifest.
    """
    manifest = load_manifest(manifest_path)
    dataset_dir = manifest_path.parent
    instances = []
    for split in SPLITS:
        path = dataset_dir / f"{split}.jsonl"
        if path.exists():
            instances.extend(load_instances(path))
    if not instances:
        raise click.ClickException(f"no split files found next to {manifest_path}")
    violations = audit_decoupling(manifest, instances)
    for violation in violations[:20]:
        click.echo(
            f"violation: {violation.kind} paper {violation.shared_paper_id} shared by "
            f"{violation.instance_a} and {violation.instance_b}"
        )
    click.echo(f"{len(violations)} decoupling violations in {len(instances)} instances")
    if violations:
        raise SystemExit(1)


@main.command("score")
@click.option("--candidates", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--references", required=True, type=click.Path(exists=True, path_type=Path))
def score_cmd(candidates: Path, references: Path) -> None:
    """Mean ROUGE-1/2/L F1 between aligned line files, in percent."""
    cand = _read_lines(candidates)
    refs = _read_lines(references)
    if len(cand) != len(refs):
        raise click.ClickException(
            f"line counts differ: {len(cand)} candidates vs {len(refs)} references"
        )
    means = mean_scores(cand, refs)
    click.echo(f"{'R-1':>8} {'R-2':>8} {'R-L':>8} {'n':>6}")
    click.echo(
        f"{means['rouge1']:>8.2f} {means['rouge2']:>8.2f} {means['rougeL']:>8.2f} {len(cand):>6d}"
    )


@main.command("init-encoder")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.option("--seed", default=0, show_default=True)
@click.option("--d-model", default=48, show_default=True)
@click.option("--n-layers", default=2, show_default=True)
def init_encoder_cmd(corpus_path: Path, out: Path, seed: int, d_model: int, n_layers: int) -> None:
    """Build the shared base encoder checkpoint from corpus text."""
    corpus = Corpus.load(corpus_path)
    config = EncoderConfig(d_model=d_model, n_layers=n_layers)
    encoder = build_base_encoder(_corpus_texts(corpus), config, seed=seed)
    save_encoder(out, encoder, meta={"seed": seed, "vocab_size": len(encoder.vocab)})
    click.echo(f"base encoder saved to {out} (vocab {len(encoder.vocab)})")


@main.command("train-classifier")
@click.option("--examples", "examples_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--encoder", "encoder_path", type=click.Path(exists=True, path_type=Path))
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.option("--epochs", default=30, show_default=True)
@click.option("--lr", default=1e-3, show_default=True)
@click.option("--batch-size", default=16, show_default=True)
@click.option("--seed", default=0, show_default=True)
def train_classifier_cmd(examples_path: Path, encoder_path: Path | None, out: Path, epochs: int, lr: float, batch_size: int, seed: int) -> None:
    """Train the scaffolded intent classifier used for oracle labeling."""
    examples = load_intent_examples(examples_path)
    if encoder_path is not None:
        encoder, _ = load_encoder(encoder_path)
    else:
        encoder = build_base_encoder([e.sentence for e in examples], seed=seed)
    config = ClassifierTrainConfig(epochs=epochs, learning_rate=lr, batch_size=batch_size, seed=seed)
    classifier = train_intent_classifier(examples, encoder, ScaffoldConfig(), config)
    save_classifier(out, classifier, meta={"n_examples": len(examples), "seed": seed})
    click.echo(f"intent classifier saved to {out} ({len(examples)} examples)")


@main.command("label")
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--intent-model", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", required=True, type=click.Path(path_type=Path))
def label_cmd(dataset_dir: Path, corpus_path: Path, intent_model: Path, out: Path) -> None:
    """Attach oracle attributes (intent, keywords, sentences) to a dataset."""
    corpus = Corpus.load(corpus_path)
    classifier = load_classifier(intent_model)
    manifest, splits = load_split_dataset(dataset_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_manifest(out / "manifest.jsonl", manifest)
    intent_counts: dict[str, int] = {}
    for split, instances in splits.items():
        labeled = label_dataset(instances, corpus, classifier)
        save_instances(out / f"{split}.jsonl", labeled)
        for instance in labeled:
            if instance.attributes and instance.attributes.intent:
                key = f"{split}/{instance.attributes.intent}"
                intent_counts[key] = intent_counts.get(key, 0) + 1
    for key in sorted(intent_counts):
        click.echo(f"{key}: {intent_counts[key]}")


@main.command("train-suggester")
@click.option("--task", required=True, type=click.Choice(["intent", "keywords", "sentences"]))
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, path_type=Path))
@click.option("--encoder", "encoder_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.option("--epochs", default=None, type=int, help="Override the task default.")
@click.option("--lr", default=1e-3, show_default=True)
@click.option("--pairs-per-query", default=16, show_default=True)
@click.option("--seed", default=0, show_default=True)
def train_suggester_cmd(task: str, dataset_dir: Path, corpus_path: Path | None, encoder_path: Path, out: Path, epochs: int | None, lr: float, pairs_per_query: int, seed: int) -> None:
    """Fine-tune one suggestion model from the base encoder checkpoint."""
    _, splits = load_split_dataset(dataset_dir)
    train_instances = splits[TRAIN]
    encoder, _ = load_encoder(encoder_path)
    if task == "intent":
        predictor = IntentPredictor(encoder)
        config = PredictorTrainConfig(epochs=epochs or 20, learning_rate=lr, seed=seed)
        train_intent_predictor(train_instances, predictor, config)
        save_predictor(out, predictor, meta={"seed": seed})
    else:
        corpus = Corpus.load(corpus_path) if corpus_path else None
        extractor = ExtractorConfig()
        if task == "sentences" and corpus is None:
            raise click.ClickException("--corpus is required for the sentences task")
        queries = build_triplet_queries(
            train_instances,
            task,
            corpus=corpus,
            rank_clamp=extractor.sentence_rank_clamp if task == "sentences" else None,
        )
        config = TripletTrainConfig(
            epochs=epochs or 3, learning_rate=lr, pairs_per_query=pairs_per_query, seed=seed
        )
        triplet_fine_tune(encoder, queries, extractor, config)
        save_encoder(out, encoder, meta={"task": task, "n_queries": len(queries), "seed": seed})
    click.echo(f"{task} model saved to {out}")


@main.command("suggest")
@click.option("--context", "context_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--cited", "cited_id", required=True)
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--models", "models_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--mode", default="ui", type=click.Choice(["auto", "ui"]), show_default=True)
def suggest_cmd(context_path: Path, cited_id: str, corpus_path: Path, models_dir: Path, mode: str) -> None:
    """Suggest attributes for a context file (one sentence per line)."""
    corpus = Corpus.load(corpus_path)
    cited = corpus.get(cited_id)
    if cited is None:
        raise click.ClickException(f"unknown cited paper {cited_id!r}")
    models = _load_suggester(models_dir)
    context = ContextBundle(
        local_context=tuple(_read_lines(context_path)),
        cited_title=cited.title,
        cited_abstract=cited.abstract,
    )
    bundle = suggest(context, cited, models, mode=mode)
    click.echo(json.dumps(
        {
            "intent": {
                "label": bundle.intent.label,
                "probabilities": {
                    name: float(p) for name, p in zip(INTENTS, bundle.intent.probabilities)
                },
            },
            "keywords": [{"text": s.text, "score": s.score} for s in bundle.keywords],
            "sentences": [{"text": s.text, "score": s.score} for s in bundle.sentences],
        },
        indent=2,
    ))


def _load_suggester(models_dir: Path) -> SuggesterModels:
    return SuggesterModels(
        intent_predictor=load_predictor(models_dir / "intent_predictor.pt"),
        keyword_encoder=load_encoder(models_dir / "keyword_encoder.pt")[0],
        sentence_encoder=load_encoder(models_dir / "sentence_encoder.pt")[0],
    )


@main.command("train-generator")
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path))
@click.option("--out", required=True, type=click.Path(path_type=Path))
def train_generator_cmd(dataset_dir: Path, config_path: Path | None, out: Path) -> None:
    """Train the conditional generator on the labeled train split."""
    raw = _load_yaml(config_path) if config_path else {}
    model_cfg = _from_mapping(GeneratorConfig, raw.get("model", {}))
    train_cfg = _from_mapping(GeneratorTrainConfig, raw.get("train", {}))
    _, splits = load_split_dataset(dataset_dir)
    train_instances = splits[TRAIN]
    if not train_instances:
        raise click.ClickException("train split is empty")
    torch.manual_seed(train_cfg.seed)
    vocab = build_generator_vocab(train_instances)
    model = TinySeq2Seq(vocab, model_cfg)
    meta = train_generator(train_instances, model, train_cfg)
    save_generator(out, model, meta)
    click.echo(f"generator saved to {out} (final loss {meta['final_loss']:.4f})")


@main.command("generate")
@click.option("--context", "context_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--cited", "cited_id", required=True)
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--intent", default="", help="Intent attribute; empty to omit.")
@click.option("--keywords", default="", help="Semicolon-joined keyword attributes.")
@click.option("--sentences", "sentences_path", type=click.Path(exists=True, path_type=Path))
@click.option("--beam", default=None, type=int, help="Beam width (default: model config).")
def generate_cmd(context_path: Path, cited_id: str, corpus_path: Path, model_path: Path, intent: str, keywords: str, sentences_path: Path | None, beam: int | None) -> None:
    """Generate one citing sentence from explicit attributes."""
    corpus = Corpus.load(corpus_path)
    cited = corpus.get(cited_id)
    if cited is None:
        raise click.ClickException(f"unknown cited paper {cited_id!r}")
    model = load_generator(model_path)
    attributes = CitationAttributes(
        intent=intent,
        keywords=tuple(k.strip() for k in keywords.split(";") if k.strip()),
        sentences=tuple(_read_lines(sentences_path)) if sentences_path else (),
    )
    context = ContextBundle(
        local_context=tuple(_read_lines(context_path)),
        cited_title=cited.title,
        cited_abstract=cited.abstract,
    )
    click.echo(model.generate(serialize_prompt(attributes, context), beam_width=beam))


def _generate_fn(model: TinySeq2Seq, beam_width: int | None):
    def fn(attributes: CitationAttributes, context: ContextBundle) -> str:
        return model.generate(serialize_prompt(attributes, context), beam_width=beam_width)

    return fn


def _auto_attribute_fn(corpus: Corpus, models: SuggesterModels):
    def fn(instance) -> CitationAttributes:
        cited = corpus.get(instance.cited_paper_id)
        bundle = suggest(instance.context, cited, models, mode="auto")
        return CitationAttributes(
            intent=bundle.intent.label,
            keywords=tuple(s.text for s in bundle.keywords),
            sentences=tuple(s.text for s in bundle.sentences),
        )

    return fn


@main.command("evaluate")
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--generator", "generator_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, path_type=Path))
@click.option("--suggester", "models_dir", type=click.Path(exists=True, path_type=Path))
@click.option("--intent-model", type=click.Path(exists=True, path_type=Path))
@click.option("--mode", required=True, type=click.Choice(["auto", "controlled", "intent-ctrl", "match-rate"]))
@click.option("--split", default=TEST, type=click.Choice(list(SPLITS)), show_default=True)
@click.option("--kind", default="keyword", type=click.Choice(["keyword", "sentence"]), show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--limit", default=None, type=int, help="Cap the number of instances; n is reported.")
@click.option("--beam", default=1, show_default=True, help="Decode beam width during evaluation.")
@click.option("--ablations", is_flag=True, help="Add single-attribute ablation rows.")
@click.option("--report", "report_path", type=click.Path(path_type=Path))
def evaluate_cmd(dataset_dir: Path, generator_path: Path, corpus_path: Path | None, models_dir: Path | None, intent_model: Path | None, mode: str, split: str, kind: str, seed: int, limit: int | None, beam: int, ablations: bool, report_path: Path | None) -> None:
    """Run one evaluation protocol on a labeled dataset split."""
    _, splits = load_split_dataset(dataset_dir)
    instances = splits[split]
    if not instances:
        raise click.ClickException(f"{split} split is empty")
    model = load_generator(generator_path)
    generate_fn = _generate_fn(model, beam)

    if mode in ("auto", "controlled"):
        if mode == "auto":
            if models_dir is None or corpus_path is None:
                raise click.ClickException("--suggester and --corpus are required for auto mode")
            attribute_fn = _auto_attribute_fn(Corpus.load(corpus_path), _load_suggester(models_dir))
            system = "generator (suggested attrs)"
        else:
            attribute_fn = oracle_attribute_fn
            system = "generator (oracle attrs)"
        report = EvalReport(mode=mode)
        report.rows.append(
            eval_mode(instances, generate_fn, attribute_fn, NO_ATTRIBUTES,
                      system="generator (no attrs)", mode=mode, limit=limit)
        )
        if ablations:
            for name, flags in (
                ("intent only", AblationFlags(True, False, False)),
                ("keywords only", AblationFlags(False, True, False)),
                ("sentences only", AblationFlags(False, False, True)),
            ):
                report.rows.append(
                    eval_mode(instances, generate_fn, attribute_fn, flags,
                              system=f"generator ({name})", mode=mode, limit=limit)
                )
        report.rows.append(
            eval_mode(instances, generate_fn, attribute_fn, FULL_ATTRIBUTES,
                      system=system, mode=mode, limit=limit)
        )
        click.echo(render_eval_table(report))
        _write_report(report_path, report.as_dict())
    elif mode == "intent-ctrl":
        if intent_model is None:
            raise click.ClickException("--intent-model is required for intent-ctrl mode")
        classifier = load_classifier(intent_model)
        matrix = intent_controllability(
            instances, generate_fn, lambda s: pseudo_label_intent(classifier, s), limit=limit
        )
        click.echo(render_confusion_matrix(matrix))
        _write_report(report_path, matrix.as_dict())
    else:
        if models_dir is None or corpus_path is None:
            raise click.ClickException("--suggester and --corpus are required for match-rate mode")
        corpus = Corpus.load(corpus_path)
        models = _load_suggester(models_dir)
        judge, _ = load_encoder(models_dir / "base_encoder.pt")

        def candidates_fn(instance) -> list[str]:
            cited = corpus.get(instance.cited_paper_id)
            bundle = suggest(instance.context, cited, models, mode="ui")
            scored = bundle.keywords if kind == "keyword" else bundle.sentences
            return [s.text for s in scored]

        result = attribute_match_rate(
            instances, generate_fn, judge, candidates_fn, kind=kind, seed=seed, limit=limit
        )
        click.echo(
            f"{kind} match rate: {result.frequency:.3f} "
            f"({result.matches}/{result.trials} trials, {result.skipped} skipped)"
        )
        _write_report(report_path, result.as_dict())


@main.command("serve")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, path_type=Path))
def serve_cmd(config_path: Path) -> None:
    """Run the HTTP service from a YAML config."""
    from .service import ServiceConfig, run_service

    run_service(ServiceConfig.from_yaml(config_path))


@main.command("pipeline")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--workdir", required=True, type=click.Path(path_type=Path))
def pipeline_cmd(config_path: Path, workdir: Path) -> None:
    """Full chain: corpus, dataset, oracle labels, suggesters, generator,
    evaluation; emits ``report.json`` in the workdir."""
    report = run_pipeline(_load_yaml(config_path), workdir)
    gap = report["evaluation"]["conditioning_gap_rouge1"]
    click.echo(f"pipeline complete; conditioning gap R-1 = {gap:+.2f}")
    click.echo(f"report: {workdir / 'report.json'}")


def run_pipeline(config: dict, workdir: Path) -> dict:
    """The pipeline body; returns the machine-readable report dict."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    models_dir = workdir / "models"
    report: dict = {"stages": {}}

    def stage(name: str):
        click.echo(f"[{name}] ...")
        start = time.monotonic()

        def done(**info) -> None:
            elapsed = time.monotonic() - start
            report["stages"][name] = {"seconds": round(elapsed, 2), **info}
            click.echo(f"[{name}] done in {elapsed:.1f}s")

        return done

    # corpus
    done = stage("corpus")
    corpus_cfg = config.get("corpus", {})
    corpus_path = workdir / "corpus.jsonl"
    if "synthetic" in corpus_cfg:
        desk_cfg = _from_mapping(DeskCorpusConfig, corpus_cfg["synthetic"])
        records, bibliography = build_desk_corpus(desk_cfg)
        write_raw_corpus(workdir, records, bibliography)
        raw_iter = iter(records)
    else:
        bibliography = json.loads(Path(corpus_cfg["bibliography"]).read_text())
        raw_iter = load_raw_records(corpus_cfg["input"])
    corpus, ingest_report = ingest_papers(raw_iter, bibliography)
    corpus.save(corpus_path)
    done(papers=ingest_report.n_papers, mentions=ingest_report.n_mentions)

    # intent corpus
    done = stage("intent-corpus")
    intent_cfg = dict(config.get("intent_corpus", {}))
    holdout = float(intent_cfg.pop("holdout_fraction", 0.2))
    examples = build_intent_corpus(**intent_cfg)
    cut = int(len(examples) * (1.0 - holdout))
    intent_train, intent_test = examples[:cut], examples[cut:]
    save_intent_examples(workdir / "intent_train.jsonl", intent_train)
    save_intent_examples(workdir / "intent_test.jsonl", intent_test)
    done(train=len(intent_train), test=len(intent_test))

    # dataset
    done = stage("dataset")
    dataset_config = DatasetConfig.from_dict(config.get("dataset", {}))
    manifest, instances, stats = prepare_dataset(corpus, dataset_config)
    dataset_dir = workdir / "dataset"
    save_split_dataset(dataset_dir, manifest, instances)
    violations = audit_decoupling(manifest, instances)
    if violations:
        raise click.ClickException(f"decoupling audit failed: {len(violations)} violations")
    report["dataset"] = stats
    done(
        train=stats[TRAIN]["citation_sentences"],
        validation=stats[VALIDATION]["citation_sentences"],
        test=stats[TEST]["citation_sentences"],
        audit_violations=0,
    )

    # base encoder
    done = stage("base-encoder")
    encoder_cfg = _from_mapping(EncoderConfig, config.get("encoder", {}))
    encoder_seed = int(config.get("encoder_seed", 0))
    base = build_base_encoder(_corpus_texts(corpus), encoder_cfg, seed=encoder_seed)
    base_path = models_dir / "base_encoder.pt"
    save_encoder(base_path, base, meta={"seed": encoder_seed})
    done(vocab=len(base.vocab))

    # intent classifier (oracle labeler)
    done = stage("classifier")
    classifier_cfg = _from_mapping(ClassifierTrainConfig, config.get("classifier", {}))
    classifier = train_intent_classifier(
        intent_train, load_encoder(base_path)[0], ScaffoldConfig(), classifier_cfg
    )
    classifier_path = models_dir / "intent_classifier.pt"
    save_classifier(classifier_path, classifier)
    held = [e for e in intent_test if e.intent is not None]
    y_true = [e.intent for e in held]
    y_pred = classifier.predict_batch([e.sentence for e in held])
    clf_f1 = macro_f1(y_true, y_pred, INTENTS)
    train_intents = [e.intent for e in intent_train if e.intent is not None]
    majority = max(set(train_intents), key=train_intents.count)
    majority_f1 = macro_f1(y_true, [majority] * len(y_true), INTENTS)
    accuracy = sum(t == p for t, p in zip(y_true, y_pred)) / len(held) if held else 0.0
    report["classifier"] = {
        "macro_f1": clf_f1,
        "majority_macro_f1": majority_f1,
        "accuracy": accuracy,
        "majority_class": majority,
        "n_test": len(held),
        "y_true": y_true,
        "y_pred": y_pred,
    }
    done(macro_f1=round(clf_f1, 4), majority_macro_f1=round(majority_f1, 4))

    # oracle labels
    done = stage("label")
    labeled_dir = workdir / "labeled"
    labeled_dir.mkdir(parents=True, exist_ok=True)
    save_manifest(labeled_dir / "manifest.jsonl", manifest)
    labeled_splits: dict[str, list] = {}
    for split in SPLITS:
        labeled = label_dataset(manifest.instances_for(instances, split), corpus, classifier)
        labeled_splits[split] = labeled
        save_instances(labeled_dir / f"{split}.jsonl", labeled)
    done(**{s: len(labeled_splits[s]) for s in SPLITS})

    # suggesters
    done = stage("suggester")
    suggester_cfg = config.get("suggester", {})
    predictor_cfg = _from_mapping(PredictorTrainConfig, suggester_cfg.get("predictor", {}))
    triplet_cfg = _from_mapping(TripletTrainConfig, suggester_cfg.get("triplet", {}))
    extractor_cfg = _from_mapping(ExtractorConfig, suggester_cfg.get("extractor", {}))

    predictor = IntentPredictor(load_encoder(base_path)[0])
    train_intent_predictor(labeled_splits[TRAIN], predictor, predictor_cfg)
    save_predictor(models_dir / "intent_predictor.pt", predictor)

    keyword_encoder, _ = load_encoder(base_path)
    kw_queries = build_triplet_queries(labeled_splits[TRAIN], "keywords")
    triplet_fine_tune(keyword_encoder, kw_queries, extractor_cfg, triplet_cfg)
    save_encoder(models_dir / "keyword_encoder.pt", keyword_encoder, meta={"task": "keywords"})

    sentence_encoder, _ = load_encoder(base_path)
    sent_queries = build_triplet_queries(
        labeled_splits[TRAIN], "sentences", corpus=corpus,
        rank_clamp=extractor_cfg.sentence_rank_clamp,
    )
    triplet_fine_tune(sentence_encoder, sent_queries, extractor_cfg, triplet_cfg)
    save_encoder(models_dir / "sentence_encoder.pt", sentence_encoder, meta={"task": "sentences"})
    done(keyword_queries=len(kw_queries), sentence_queries=len(sent_queries))

    # generator
    done = stage("generator")
    generator_cfg = config.get("generator", {})
    model_cfg = _from_mapping(GeneratorConfig, generator_cfg.get("model", {}))
    train_cfg = _from_mapping(GeneratorTrainConfig, generator_cfg.get("train", {}))
    torch.manual_seed(train_cfg.seed)
    vocab = build_generator_vocab(labeled_splits[TRAIN])
    generator = TinySeq2Seq(vocab, model_cfg)
    gen_meta = train_generator(labeled_splits[TRAIN], generator, train_cfg)
    save_generator(models_dir / "generator.pt", generator, gen_meta)
    done(final_loss=round(gen_meta["final_loss"], 4), n=gen_meta["num_instances"])

    # evaluation
    done = stage("evaluate")
    eval_cfg = config.get("evaluate", {})
    beam = eval_cfg.get("beam_width", 1)
    seed = int(eval_cfg.get("seed", 0))
    test_instances = labeled_splits[TEST]
    generate_fn = _generate_fn(generator, beam)

    rouge_report = EvalReport(mode="controlled")
    rouge_report.rows.append(
        eval_mode(test_instances, generate_fn, oracle_attribute_fn, NO_ATTRIBUTES,
                  system="generator (no attrs)", mode="controlled",
                  limit=eval_cfg.get("limit_conditioning"))
    )
    rouge_report.rows.append(
        eval_mode(test_instances, generate_fn, oracle_attribute_fn, FULL_ATTRIBUTES,
                  system="generator (oracle attrs)", mode="controlled",
                  limit=eval_cfg.get("limit_conditioning"))
    )
    gap = rouge_report.rows[1].rouge1 - rouge_report.rows[0].rouge1

    matrix = intent_controllability(
        test_instances, generate_fn,
        lambda s: pseudo_label_intent(classifier, s),
        limit=eval_cfg.get("limit_intent"),
    )

    suggester_models = SuggesterModels(
        intent_predictor=predictor,
        keyword_encoder=keyword_encoder,
        sentence_encoder=sentence_encoder,
    )
    judge, _ = load_encoder(base_path)

    def candidates_fn(instance) -> list[str]:
        cited = corpus.get(instance.cited_paper_id)
        bundle = suggest(instance.context, cited, suggester_models, extractor_cfg, mode="ui")
        return [s.text for s in bundle.keywords]

    match = attribute_match_rate(
        test_instances, generate_fn, judge, candidates_fn,
        kind="keyword", seed=seed, limit=eval_cfg.get("limit_match"),
    )

    report["evaluation"] = {
        "rouge": rouge_report.as_dict(),
        "conditioning_gap_rouge1": gap,
        "intent_confusion": matrix.as_dict(),
        "keyword_match_rate": match.as_dict(),
    }
    done(gap_rouge1=round(gap, 2), match_rate=round(match.frequency, 3))

    click.echo(render_eval_table(rouge_report))
    click.echo(render_confusion_matrix(matrix))
    (workdir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    return report


if __name__ == "__main__":
    main()
