"""Conditional citation-sentence generation.

Attributes plus context are flattened into a single field-coded prompt and a
small transformer encoder-decoder is trained to emit the citing sentence.
Attribute dropout during training keeps the model usable when a user
supplies only a subset of the control fields.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import torch
from torch import nn
from torch.nn import functional as F

from .dataset import CitationAttributes, CitationInstance, ContextBundle
from .encoder import Vocab, whitespace_tokenize

logger = logging.getLogger(__name__)

TEMPLATE_VERSION = "field-coded-v1"

FIELD_MARKERS = ("intent:", "keywords:", "sentences:", "context:", "title:", "abstract:")

ATTRIBUTE_DROP_PROBABILITY = 0.5


def serialize_prompt(attributes: CitationAttributes, context: ContextBundle) -> str:
    """Flatten attributes and context into the generation prompt.

    Each field is rendered as ``marker: payload`` and the fields are joined
    with single spaces; list payloads join their items with ``"; "``.  An
    empty payload leaves nothing after the marker, so two spaces separate it
    from the next marker.
    """
    payloads = (
        attributes.intent or "",
        "; ".join(attributes.keywords),
        "; ".join(attributes.sentences),
        " ".join(context.local_context),
        context.cited_title,
        context.cited_abstract,
    )
    return " ".join(f"{marker} {payload}" for marker, payload in zip(FIELD_MARKERS, payloads))


def attribute_dropout(attributes: CitationAttributes, rng: random.Random) -> CitationAttributes:
    """Randomly weaken the conditioning signal for one training example.

    The intent is blanked with probability 0.5.  For keywords, a subset size
    m is drawn uniformly from {0, ..., n} and a random subset of that size is
    kept in the original order; sentences get the same treatment with an
    independent draw.
    """
    intent = attributes.intent if rng.random() >= ATTRIBUTE_DROP_PROBABILITY else ""

    def keep_subset(items: tuple[str, ...]) -> tuple[str, ...]:
        n = len(items)
        m = rng.randint(0, n)
        if m == n:
            return items
        kept = sorted(rng.sample(range(n), m))
        return tuple(items[i] for i in kept)

    return CitationAttributes(
        intent=intent,
        keywords=keep_subset(attributes.keywords),
        sentences=keep_subset(attributes.sentences),
    )


@dataclass(frozen=True)
class GeneratorConfig:
    d_model: int = 96
    n_heads: int = 4
    num_encoder_layers: int = 2
    num_decoder_layers: int = 2
    dim_feedforward: int = 192
    dropout: float = 0.0
    max_input_tokens: int = 512
    max_output_tokens: int = 75
    beam_width: int = 4

    def __post_init__(self) -> None:
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        if self.max_input_tokens < 1 or self.max_output_tokens < 1:
            raise ValueError("token limits must be >= 1")
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")


class _PointerDecoderLayer(nn.Module):
    """Post-norm decoder layer that also returns its cross-attention weights
    and context vectors, which the copy head needs."""

    def __init__(self, d_model: int, n_heads: int, dim_feedforward: int, dropout: float):
        super().__init__()
        self.self_attn = nn.MultiheadAttention(d_model, n_heads, dropout=dropout, batch_first=True)
        self.cross_attn = nn.MultiheadAttention(d_model, n_heads, dropout=dropout, batch_first=True)
        self.ff = nn.Sequential(
            nn.Linear(d_model, dim_feedforward),
            nn.ReLU(),
            nn.Dropout(dropout),
            nn.Linear(dim_feedforward, d_model),
        )
        self.norm1 = nn.LayerNorm(d_model)
        self.norm2 = nn.LayerNorm(d_model)
        self.norm3 = nn.LayerNorm(d_model)
        self.drop = nn.Dropout(dropout)

    def forward(
        self,
        tgt: torch.Tensor,
        memory: torch.Tensor,
        causal_mask: torch.Tensor,
        tgt_pad: torch.Tensor | None,
        memory_pad: torch.Tensor | None,
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        attended, _ = self.self_attn(
            tgt, tgt, tgt, attn_mask=causal_mask,
            key_padding_mask=tgt_pad, need_weights=False,
        )
        x = self.norm1(tgt + self.drop(attended))
        context, weights = self.cross_attn(
            x, memory, memory, key_padding_mask=memory_pad,
            need_weights=True, average_attn_weights=True,
        )
        x = self.norm2(x + self.drop(context))
        x = self.norm3(x + self.drop(self.ff(x)))
        return x, weights, context


class TinySeq2Seq(nn.Module):
    """Desk-scale transformer encoder-decoder over whitespace tokens.

    The output layer is a pointer-generator mixture: a gate interpolates
    between the vocabulary softmax and the last decoder layer's
    cross-attention distribution scattered onto source token ids.  The copy
    path is what lets a small model reproduce conditioning attributes (e.g.
    a requested keyword) verbatim instead of having to memorize every
    attribute-to-token mapping."""

    def __init__(self, vocab: Vocab, config: GeneratorConfig | None = None):
        super().__init__()
        self.vocab = vocab
        self.config = config or GeneratorConfig()
        cfg = self.config
        max_pos = max(cfg.max_input_tokens, cfg.max_output_tokens + 1)
        self.token_emb = nn.Embedding(len(vocab), cfg.d_model, padding_idx=vocab.pad_id)
        self.pos_emb = nn.Embedding(max_pos, cfg.d_model)
        encoder_layer = nn.TransformerEncoderLayer(
            d_model=cfg.d_model,
            nhead=cfg.n_heads,
            dim_feedforward=cfg.dim_feedforward,
            dropout=cfg.dropout,
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(
            encoder_layer, num_layers=cfg.num_encoder_layers, enable_nested_tensor=False
        )
        self.decoder_layers = nn.ModuleList(
            _PointerDecoderLayer(cfg.d_model, cfg.n_heads, cfg.dim_feedforward, cfg.dropout)
            for _ in range(cfg.num_decoder_layers)
        )
        self.copy_gate = nn.Linear(2 * cfg.d_model, 1)
        # Start the mixture leaning on the vocabulary softmax.  If the gate
        # instead saturates toward the copy path before the softmax has
        # learned anything, positions whose token never occurs in the source
        # lose gradient through both paths at once and training stalls.
        nn.init.constant_(self.copy_gate.bias, 2.0)
        # Tied input/output embeddings keep generation and copying in the
        # same representation space.
        self.out_proj = nn.Linear(cfg.d_model, len(vocab), bias=False)
        self.out_proj.weight = self.token_emb.weight

    @property
    def d_model(self) -> int:
        return self.config.d_model

    def _embed(self, ids: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(ids.shape[1], device=ids.device).unsqueeze(0)
        return self.token_emb(ids) * math.sqrt(self.d_model) + self.pos_emb(positions)

    @staticmethod
    def _pad(batch_ids: Sequence[Sequence[int]], pad_id: int) -> tuple[torch.Tensor, torch.Tensor]:
        max_len = max(len(ids) for ids in batch_ids)
        tensor = torch.full((len(batch_ids), max_len), pad_id, dtype=torch.long)
        for row, ids in enumerate(batch_ids):
            tensor[row, : len(ids)] = torch.tensor(ids, dtype=torch.long)
        return tensor, tensor.eq(pad_id)

    def _encode(self, src: torch.Tensor, src_pad: torch.Tensor) -> torch.Tensor:
        return self.encoder(self._embed(src), src_key_padding_mask=src_pad)

    def _decode(
        self,
        tgt: torch.Tensor,
        memory: torch.Tensor,
        tgt_pad: torch.Tensor | None,
        memory_pad: torch.Tensor | None,
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        length = tgt.shape[1]
        causal = torch.triu(torch.ones(length, length, dtype=torch.bool), diagonal=1)
        hidden = self._embed(tgt)
        weights = context = None
        for layer in self.decoder_layers:
            hidden, weights, context = layer(hidden, memory, causal, tgt_pad, memory_pad)
        return hidden, weights, context

    def _mixture_logprobs(
        self,
        hidden: torch.Tensor,
        weights: torch.Tensor,
        context: torch.Tensor,
        src: torch.Tensor,
    ) -> torch.Tensor:
        """Pointer-generator distribution, shape (batch, tgt_len, vocab).

        The mixture is assembled in log space.  Taking log of the
        probability-space sum needs an epsilon floor, and once a token's
        mixture mass falls under that floor its gradient all but vanishes,
        so early training can permanently bury tokens the copy path cannot
        reach.  logsumexp instead yields posterior-weighted gradients for
        both branches at any probability."""
        log_vocab = torch.log_softmax(self.out_proj(hidden), dim=-1)
        z = self.copy_gate(torch.cat([hidden, context], dim=-1))
        copy_probs = torch.zeros_like(log_vocab)
        index = src.unsqueeze(1).expand(-1, hidden.shape[1], -1)
        copy_probs.scatter_add_(-1, index, weights)
        log_copy = torch.log(copy_probs + 1e-12)
        stacked = torch.stack(
            [F.logsigmoid(z) + log_vocab, F.logsigmoid(-z) + log_copy]
        )
        return torch.logsumexp(stacked, dim=0)

    def forward(
        self, src_ids: Sequence[Sequence[int]], tgt_in_ids: Sequence[Sequence[int]]
    ) -> torch.Tensor:
        """Teacher-forced token log-probabilities, shape (batch, tgt_len, vocab)."""
        src, src_pad = self._pad(src_ids, self.vocab.pad_id)
        tgt, tgt_pad = self._pad(tgt_in_ids, self.vocab.pad_id)
        memory = self._encode(src, src_pad)
        hidden, weights, context = self._decode(tgt, memory, tgt_pad, src_pad)
        return self._mixture_logprobs(hidden, weights, context, src)

    def encode_prompt(self, prompt: str) -> list[int]:
        tokens = whitespace_tokenize(prompt)[: self.config.max_input_tokens]
        return self.vocab.encode(tokens) if tokens else [self.vocab.unk_id]

    @torch.no_grad()
    def _step_logprobs(
        self,
        memory: torch.Tensor,
        src: torch.Tensor,
        src_pad: torch.Tensor,
        prefixes: list[list[int]],
    ) -> torch.Tensor:
        tgt, tgt_pad = self._pad(prefixes, self.vocab.pad_id)
        rows = len(prefixes)
        hidden, weights, context = self._decode(
            tgt, memory.expand(rows, -1, -1), tgt_pad, src_pad.expand(rows, -1)
        )
        logprobs = self._mixture_logprobs(
            hidden, weights, context, src.expand(rows, -1)
        )
        last = torch.stack([logprobs[i, len(p) - 1] for i, p in enumerate(prefixes)])
        return last

    @torch.no_grad()
    def generate(self, prompt: str, beam_width: int | None = None, max_new_tokens: int | None = None) -> str:
        """Decode a citing sentence for a serialized prompt.

        ``beam_width=1`` is greedy; wider beams rank finished hypotheses by
        length-normalized log-probability.  Output stops at [EOS] or the
        output token limit.
        """
        self.eval()
        width = self.config.beam_width if beam_width is None else beam_width
        limit = self.config.max_output_tokens if max_new_tokens is None else max_new_tokens
        src = self.encode_prompt(prompt)
        src_tensor, src_pad = self._pad([src], self.vocab.pad_id)
        memory = self._encode(src_tensor, src_pad)

        bos, eos = self.vocab.bos_id, self.vocab.eos_id
        live: list[tuple[list[int], float]] = [([bos], 0.0)]
        finished: list[tuple[list[int], float]] = []
        for _ in range(limit):
            if not live:
                break
            logprobs = self._step_logprobs(memory, src_tensor, src_pad, [ids for ids, _ in live])
            candidates: list[tuple[list[int], float]] = []
            for row, (ids, score) in enumerate(live):
                top = torch.topk(logprobs[row], min(width, logprobs.shape[1]))
                for logp, token in zip(top.values.tolist(), top.indices.tolist()):
                    candidates.append((ids + [token], score + logp))
            candidates.sort(key=lambda c: -c[1])
            live = []
            for ids, score in candidates:
                if ids[-1] == eos:
                    finished.append((ids, score))
                elif len(live) < width:
                    live.append((ids, score))
                if len(live) >= width and len(finished) >= width:
                    break
        finished.extend(live)

        def normalized(entry: tuple[list[int], float]) -> float:
            ids, score = entry
            length = max(1, len(ids) - 1)
            return score / length

        best_ids, _ = max(finished, key=normalized)
        tokens = [t for t in best_ids if t not in (bos, eos, self.vocab.pad_id)]
        return " ".join(self.vocab.decode(tokens))


def build_generator_vocab(instances: Sequence[CitationInstance], max_size: int | None = None) -> Vocab:
    """Vocabulary over serialized prompts (no dropout) and target sentences,
    so the field markers themselves are in-vocabulary tokens."""
    texts = []
    for instance in instances:
        attrs = instance.attributes or CitationAttributes()
        texts.append(serialize_prompt(attrs, instance.context))
        texts.append(instance.target_sentence)
    return Vocab.from_texts(texts, max_size=max_size)


@dataclass(frozen=True)
class GeneratorTrainConfig:
    epochs: int = 30
    learning_rate: float = 1e-5
    batch_size: int = 8
    seed: int = 0
    use_attribute_dropout: bool = True
    grad_clip: float = 1.0


def dataset_fingerprint(instances: Sequence[CitationInstance]) -> str:
    digest = hashlib.sha256()
    for instance in sorted(instances, key=lambda i: i.instance_id):
        digest.update(instance.instance_id.encode())
        digest.update(b"\x00")
        digest.update(instance.target_sentence.encode())
        digest.update(b"\x01")
    return digest.hexdigest()[:16]


def train_generator(
    instances: Sequence[CitationInstance],
    model: TinySeq2Seq,
    config: GeneratorTrainConfig | None = None,
) -> dict:
    """Teacher-forced training; attribute dropout is re-drawn every epoch so
    the model sees many conditioning subsets of the same example.  Returns a
    metadata dict recording the run."""
    cfg = config or GeneratorTrainConfig()
    usable = [i for i in instances if i.target_sentence.strip()]
    if not usable:
        raise ValueError("no usable training instances")
    torch.manual_seed(cfg.seed)
    rng = random.Random(cfg.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    loss_fn = nn.NLLLoss(ignore_index=model.vocab.pad_id)

    losses = []
    model.train()
    for _ in range(cfg.epochs):
        order = list(range(len(usable)))
        rng.shuffle(order)
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = [usable[i] for i in order[start : start + cfg.batch_size]]
            src_ids, tgt_in, tgt_out = [], [], []
            for instance in batch:
                attrs = instance.attributes or CitationAttributes()
                if cfg.use_attribute_dropout:
                    attrs = attribute_dropout(attrs, rng)
                src_ids.append(model.encode_prompt(serialize_prompt(attrs, instance.context)))
                target = model.vocab.encode(
                    whitespace_tokenize(instance.target_sentence)[: model.config.max_output_tokens]
                )
                tgt_in.append([model.vocab.bos_id] + target)
                tgt_out.append(target + [model.vocab.eos_id])
            logprobs = model(src_ids, tgt_in)
            out, _ = TinySeq2Seq._pad(tgt_out, model.vocab.pad_id)
            loss = loss_fn(logprobs.reshape(-1, logprobs.shape[-1]), out.reshape(-1))
            optimizer.zero_grad()
            loss.backward()
            nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            optimizer.step()
            epoch_loss += loss.item() * len(batch)
        losses.append(epoch_loss / len(usable))
    model.eval()

    return {
        "template_version": TEMPLATE_VERSION,
        "seed": cfg.seed,
        "epochs": cfg.epochs,
        "learning_rate": cfg.learning_rate,
        "use_attribute_dropout": cfg.use_attribute_dropout,
        "num_instances": len(usable),
        "data_fingerprint": dataset_fingerprint(usable),
        "final_loss": losses[-1],
        "loss_curve": losses,
    }


def save_generator(path: str | Path, model: TinySeq2Seq, meta: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "state_dict": model.state_dict(),
            "vocab": model.vocab.to_json(),
            "config": model.config.__dict__,
            "meta": meta or {},
        },
        path,
    )
    meta_path = path.with_suffix(path.suffix + ".json")
    meta_path.write_text(json.dumps(meta or {}, indent=2, sort_keys=True))


def load_generator(path: str | Path) -> TinySeq2Seq:
    payload = torch.load(Path(path), map_location="cpu", weights_only=False)
    model = TinySeq2Seq(Vocab.from_json(payload["vocab"]), GeneratorConfig(**payload["config"]))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model


def load_generator_meta(path: str | Path) -> dict:
    payload = torch.load(Path(path), map_location="cpu", weights_only=False)
    return payload.get("meta", {})
