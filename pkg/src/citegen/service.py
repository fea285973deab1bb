"""HTTP boundary for the suggestion-selection-generation workflow.

Stateless JSON endpoints over loaded model handles, plus an append-only
feedback store.  When two sentences are produced for comparison, their
presentation order is randomized and remembered server-side keyed by the
request id, so blinded preference feedback can be de-randomized later.
"""
from __future__ import annotations

import json
import logging
import random
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Literal, Mapping

import yaml
from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .corpus import Corpus, PaperRecord, BodySection
from .dataset import CitationAttributes, CitationInstance, ContextBundle, load_split_dataset
from .encoder import TinyTextEncoder, load_encoder
from .evaluation import NO_ATTRIBUTES
from .generator import TinySeq2Seq, load_generator, serialize_prompt
from .suggester import (
    ExtractorConfig,
    IntentPredictor,
    SuggesterModels,
    load_predictor,
    suggest,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CRITERIA = ("informative", "coherent", "intent_matched")
PREFERENCES = ("system_a", "system_b", "neutral")
SYSTEMS = ("conditional", "unconditional")


@dataclass(frozen=True)
class ServiceConfig:
    corpus_path: str | None = None
    models_dir: str | None = None
    dataset_dir: str | None = None
    feedback_path: str = "feedback.jsonl"
    host: str = "127.0.0.1"
    port: int = 8000
    presentation_seed: int | None = None  # None = nondeterministic ordering
    static_dir: str | None = None  # built browser UI, served under /ui

    @classmethod
    def from_yaml(cls, path: str | Path) -> "ServiceConfig":
        raw = yaml.safe_load(Path(path).read_text()) or {}
        return cls(**{k: v for k, v in raw.items() if k in cls.__dataclass_fields__})


class InlinePaper(BaseModel):
    title: str = ""
    abstract: str = ""
    body: list[str] = Field(default_factory=list)


class SuggestRequest(BaseModel):
    v: int = SCHEMA_VERSION
    context_text: str | None = None
    instance_id: str | None = None
    cited_paper_id: str | None = None
    cited_inline: InlinePaper | None = None


class ScoredItem(BaseModel):
    text: str
    score: float


class IntentOut(BaseModel):
    label: str
    probabilities: dict[str, float]


class SuggestResponse(BaseModel):
    v: int = SCHEMA_VERSION
    intent: IntentOut
    keywords: list[ScoredItem]
    sentences: list[ScoredItem]


class AttributesIn(BaseModel):
    intent: str | None = None
    keywords: list[str] = Field(default_factory=list)
    sentences: list[str] = Field(default_factory=list)


class DecodeParams(BaseModel):
    beam_width: int | None = Field(default=None, ge=1, le=16)
    max_tokens: int | None = Field(default=None, ge=1, le=75)


class GenerateRequest(BaseModel):
    v: int = SCHEMA_VERSION
    context_text: str | None = None
    instance_id: str | None = None
    cited_paper_id: str | None = None
    cited_inline: InlinePaper | None = None
    attributes: AttributesIn = Field(default_factory=AttributesIn)
    decode: DecodeParams = Field(default_factory=DecodeParams)
    compare_unconditional: bool = False


class GenerateResponse(BaseModel):
    v: int = SCHEMA_VERSION
    request_id: str
    conditional_sentence: str
    unconditional_sentence: str | None = None
    presentation_order: list[str] | None = None


class FeedbackRequest(BaseModel):
    v: int = SCHEMA_VERSION
    request_id: str
    preferences: dict[str, Literal["system_a", "system_b", "neutral"]]
    attributes_snapshot: AttributesIn | None = None


class FeedbackAck(BaseModel):
    v: int = SCHEMA_VERSION
    request_id: str
    recorded: bool


class FeedbackStore:
    """Append-only JSONL store holding generation-order records and
    preference records; the summary is a fold over the raw lines."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._orders: dict[str, list[str]] = {}
        if self.path.exists():
            for record in self._iter_records():
                if record.get("type") == "generation":
                    self._orders[record["request_id"]] = record["presentation_order"]

    def _iter_records(self):
        with self.path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield json.loads(line)

    def _append(self, record: dict) -> None:
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False))
                fh.write("\n")

    def record_generation(self, request_id: str, presentation_order: list[str], payload: dict) -> None:
        self._orders[request_id] = presentation_order
        self._append(
            {
                "type": "generation",
                "request_id": request_id,
                "presentation_order": presentation_order,
                "payload": payload,
                "timestamp": datetime.now(timezone.utc).isoformat(),
            }
        )

    def presentation_order(self, request_id: str) -> list[str] | None:
        return self._orders.get(request_id)

    def record_feedback(self, request_id: str, preferences: Mapping[str, str], snapshot: dict | None) -> None:
        self._append(
            {
                "type": "feedback",
                "request_id": request_id,
                "preferences": dict(preferences),
                "attributes_snapshot": snapshot,
                "timestamp": datetime.now(timezone.utc).isoformat(),
            }
        )

    def summary(self) -> dict:
        """Per-criterion percentages after mapping positional preferences
        back to systems through each request's stored presentation order."""
        counts = {c: {s: 0 for s in (*SYSTEMS, "neutral")} for c in CRITERIA}
        n = 0
        if self.path.exists():
            for record in self._iter_records():
                if record.get("type") != "feedback":
                    continue
                order = self._orders.get(record["request_id"])
                if order is None:
                    continue
                n += 1
                for criterion in CRITERIA:
                    pref = record["preferences"].get(criterion)
                    if pref == "neutral":
                        counts[criterion]["neutral"] += 1
                    elif pref == "system_a":
                        counts[criterion][order[0]] += 1
                    elif pref == "system_b":
                        counts[criterion][order[1]] += 1
        percentages = {
            criterion: {
                key: (100.0 * value / n if n else 0.0) for key, value in row.items()
            }
            for criterion, row in counts.items()
        }
        return {"n": n, "counts": counts, "percentages": percentages}


@dataclass
class ModelBundle:
    corpus: Corpus | None = None
    instances: dict[str, CitationInstance] = field(default_factory=dict)
    suggester: SuggesterModels | None = None
    judge: TinyTextEncoder | None = None
    generator: TinySeq2Seq | None = None


def load_bundle(config: ServiceConfig) -> ModelBundle:
    """Best-effort load of every model handle; missing pieces stay None and
    surface as 503 on the endpoints that need them."""
    bundle = ModelBundle()
    if config.corpus_path and Path(config.corpus_path).exists():
        bundle.corpus = Corpus.load(config.corpus_path)
    if config.dataset_dir and Path(config.dataset_dir).exists():
        _, splits = load_split_dataset(config.dataset_dir)
        for split_instances in splits.values():
            for instance in split_instances:
                bundle.instances[instance.instance_id] = instance
    if config.models_dir:
        models_dir = Path(config.models_dir)
        paths = {
            "intent_predictor": models_dir / "intent_predictor.pt",
            "keyword_encoder": models_dir / "keyword_encoder.pt",
            "sentence_encoder": models_dir / "sentence_encoder.pt",
            "base_encoder": models_dir / "base_encoder.pt",
            "generator": models_dir / "generator.pt",
        }
        if all(paths[k].exists() for k in ("intent_predictor", "keyword_encoder", "sentence_encoder")):
            bundle.suggester = SuggesterModels(
                intent_predictor=load_predictor(paths["intent_predictor"]),
                keyword_encoder=load_encoder(paths["keyword_encoder"])[0],
                sentence_encoder=load_encoder(paths["sentence_encoder"])[0],
            )
        if paths["base_encoder"].exists():
            bundle.judge = load_encoder(paths["base_encoder"])[0]
        if paths["generator"].exists():
            bundle.generator = load_generator(paths["generator"])
    return bundle


def _split_context(text: str) -> tuple[str, ...]:
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    return tuple(lines) if lines else ((text.strip(),) if text.strip() else ())


def create_app(
    config: ServiceConfig | None = None,
    bundle: ModelBundle | None = None,
    extractor_config: ExtractorConfig | None = None,
) -> FastAPI:
    config = config or ServiceConfig()
    bundle = bundle if bundle is not None else load_bundle(config)
    extractor = extractor_config or ExtractorConfig()
    store = FeedbackStore(config.feedback_path)
    order_rng = random.Random(config.presentation_seed)

    app = FastAPI(title="citegen service")
    app.state.bundle = bundle
    app.state.store = store

    def resolve_cited(paper_id: str | None, inline: InlinePaper | None) -> PaperRecord | None:
        if paper_id:
            if bundle.corpus is None or bundle.corpus.get(paper_id) is None:
                raise HTTPException(status_code=404, detail=f"unknown paper id {paper_id!r}")
            return bundle.corpus.get(paper_id)
        if inline is not None:
            return PaperRecord(
                paper_id="inline",
                title=inline.title,
                abstract=inline.abstract,
                body=(BodySection("", tuple(inline.body)),) if inline.body else (),
            )
        return None

    def resolve_context(req: SuggestRequest | GenerateRequest) -> tuple[ContextBundle, PaperRecord | None]:
        if req.instance_id:
            instance = bundle.instances.get(req.instance_id)
            if instance is None:
                raise HTTPException(status_code=404, detail=f"unknown instance {req.instance_id!r}")
            cited = bundle.corpus.get(instance.cited_paper_id) if bundle.corpus else None
            return instance.context, cited
        cited = resolve_cited(req.cited_paper_id, req.cited_inline)
        local = _split_context(req.context_text or "")
        context = ContextBundle(
            local_context=local,
            cited_title=cited.title if cited else "",
            cited_abstract=cited.abstract if cited else "",
        )
        if not context.contextual_text().strip():
            raise HTTPException(
                status_code=422, detail="context and cited content are both empty"
            )
        return context, cited

    @app.get("/health")
    def health() -> dict:
        return {
            "status": "ok",
            "v": SCHEMA_VERSION,
            "models": {
                "corpus": bundle.corpus is not None,
                "suggester": bundle.suggester is not None,
                "generator": bundle.generator is not None,
            },
        }

    @app.get("/paper/{paper_id}")
    def get_paper(paper_id: str) -> dict:
        if bundle.corpus is None:
            raise HTTPException(status_code=503, detail="corpus not loaded")
        paper = bundle.corpus.get(paper_id)
        if paper is None:
            raise HTTPException(status_code=404, detail=f"unknown paper id {paper_id!r}")
        return {
            "v": SCHEMA_VERSION,
            "paper_id": paper.paper_id,
            "title": paper.title,
            "abstract": paper.abstract,
            "year": paper.year,
            "body": [
                {"section_title": s.section_title, "sentences": list(s.sentences)}
                for s in paper.body
            ],
        }

    @app.post("/suggest", response_model=SuggestResponse)
    def post_suggest(req: SuggestRequest) -> SuggestResponse:
        if bundle.suggester is None:
            raise HTTPException(status_code=503, detail="suggestion models not loaded")
        context, cited = resolve_context(req)
        result = suggest(context, cited, bundle.suggester, extractor, mode="ui")
        probabilities = {
            label: float(p)
            for label, p in zip(
                ("background", "method", "result"), result.intent.probabilities
            )
        }
        return SuggestResponse(
            intent=IntentOut(label=result.intent.label, probabilities=probabilities),
            keywords=[ScoredItem(text=s.text, score=s.score) for s in result.keywords],
            sentences=[ScoredItem(text=s.text, score=s.score) for s in result.sentences],
        )

    @app.post("/generate", response_model=GenerateResponse)
    def post_generate(req: GenerateRequest) -> GenerateResponse:
        if bundle.generator is None:
            raise HTTPException(status_code=503, detail="generator model not loaded")
        context, _cited = resolve_context(req)
        attributes = CitationAttributes(
            intent=req.attributes.intent or "",
            keywords=tuple(req.attributes.keywords),
            sentences=tuple(req.attributes.sentences),
        )
        conditional = bundle.generator.generate(
            serialize_prompt(attributes, context),
            beam_width=req.decode.beam_width,
            max_new_tokens=req.decode.max_tokens,
        )
        request_id = uuid.uuid4().hex
        unconditional = None
        order = None
        if req.compare_unconditional:
            unconditional = bundle.generator.generate(
                serialize_prompt(NO_ATTRIBUTES.apply(attributes), context),
                beam_width=req.decode.beam_width,
                max_new_tokens=req.decode.max_tokens,
            )
            order = list(SYSTEMS)
            order_rng.shuffle(order)
        store.record_generation(
            request_id,
            order if order is not None else ["conditional"],
            {
                "attributes": req.attributes.model_dump(),
                "compare_unconditional": req.compare_unconditional,
            },
        )
        return GenerateResponse(
            request_id=request_id,
            conditional_sentence=conditional,
            unconditional_sentence=unconditional,
            presentation_order=order,
        )

    @app.post("/feedback", response_model=FeedbackAck)
    def post_feedback(req: FeedbackRequest) -> FeedbackAck:
        unknown = set(req.preferences) - set(CRITERIA)
        if unknown:
            raise HTTPException(status_code=422, detail=f"unknown criteria {sorted(unknown)}")
        if store.presentation_order(req.request_id) is None:
            raise HTTPException(status_code=404, detail=f"unknown request id {req.request_id!r}")
        store.record_feedback(
            req.request_id,
            req.preferences,
            req.attributes_snapshot.model_dump() if req.attributes_snapshot else None,
        )
        return FeedbackAck(request_id=req.request_id, recorded=True)

    @app.get("/feedback/summary")
    def feedback_summary() -> dict:
        return {"v": SCHEMA_VERSION, **store.summary()}

    if config.static_dir and Path(config.static_dir).exists():
        app.mount("/ui", StaticFiles(directory=config.static_dir, html=True), name="ui")

    return app


def run_service(config: ServiceConfig) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port)
