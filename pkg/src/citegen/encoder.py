"""Miniature trainable text encoder with a fixed word-level vocabulary.

Stands in for a large pretrained scientific-text encoder: every downstream
model (intent classifier, intent predictor, keyword/sentence extractors,
semantic judge) starts from the same saved checkpoint and is fine-tuned
separately.  ``embed_texts`` returns the mean of the last hidden states of
all tokens; classification paths prepend a [CLS] token and read its last
hidden state.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import torch
from torch import nn

PAD, UNK, CLS, SEP, BOS, EOS = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[BOS]", "[EOS]"
SPECIAL_TOKENS = (PAD, UNK, CLS, SEP, BOS, EOS)


def whitespace_tokenize(text: str) -> list[str]:
    return text.split()


class Vocab:
    """Whitespace-token vocabulary with reserved special tokens."""

    def __init__(self, tokens: Sequence[str]):
        self.id_to_token = list(SPECIAL_TOKENS) + [
            t for t in tokens if t not in SPECIAL_TOKENS
        ]
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        self.pad_id = self.token_to_id[PAD]
        self.unk_id = self.token_to_id[UNK]
        self.cls_id = self.token_to_id[CLS]
        self.sep_id = self.token_to_id[SEP]
        self.bos_id = self.token_to_id[BOS]
        self.eos_id = self.token_to_id[EOS]

    def __len__(self) -> int:
        return len(self.id_to_token)

    @classmethod
    def from_texts(cls, texts: Iterable[str], max_size: int | None = None) -> "Vocab":
        counts: dict[str, int] = {}
        for text in texts:
            for token in whitespace_tokenize(text):
                counts[token] = counts.get(token, 0) + 1
        # Frequency-sorted, ties by first-seen order via the stable sort.
        ordered = sorted(counts, key=lambda t: -counts[t])
        if max_size is not None:
            ordered = ordered[: max_size - len(SPECIAL_TOKENS)]
        return cls(ordered)

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.token_to_id.get(t, self.unk_id) for t in tokens]

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self.id_to_token[i] for i in ids]

    def to_json(self) -> dict:
        return {"tokens": self.id_to_token[len(SPECIAL_TOKENS):]}

    @classmethod
    def from_json(cls, obj: dict) -> "Vocab":
        return cls(obj["tokens"])


@dataclass
class EncoderConfig:
    d_model: int = 48
    n_heads: int = 4
    n_layers: int = 2
    dim_feedforward: int = 96
    max_len: int = 256
    dropout: float = 0.0


class TinyTextEncoder(nn.Module):
    """Small transformer encoder over the word vocabulary."""

    def __init__(self, vocab: Vocab, config: EncoderConfig | None = None, seed: int | None = None):
        super().__init__()
        self.vocab = vocab
        self.config = config or EncoderConfig()
        if seed is not None:
            torch.manual_seed(seed)
        cfg = self.config
        self.token_emb = nn.Embedding(len(vocab), cfg.d_model, padding_idx=vocab.pad_id)
        self.pos_emb = nn.Embedding(cfg.max_len, cfg.d_model)
        layer = nn.TransformerEncoderLayer(
            d_model=cfg.d_model,
            nhead=cfg.n_heads,
            dim_feedforward=cfg.dim_feedforward,
            dropout=cfg.dropout,
            batch_first=True,
        )
        self.transformer = nn.TransformerEncoder(
            layer, num_layers=cfg.n_layers, enable_nested_tensor=False
        )

    @property
    def d_model(self) -> int:
        return self.config.d_model

    def _prepare(self, token_id_lists: Sequence[Sequence[int]]) -> tuple[torch.Tensor, torch.Tensor]:
        max_len = self.config.max_len
        clipped = [list(ids[:max_len]) or [self.vocab.unk_id] for ids in token_id_lists]
        width = max(len(ids) for ids in clipped)
        batch = torch.full((len(clipped), width), self.vocab.pad_id, dtype=torch.long)
        for row, ids in enumerate(clipped):
            batch[row, : len(ids)] = torch.tensor(ids, dtype=torch.long)
        pad_mask = batch.eq(self.vocab.pad_id)
        return batch, pad_mask

    def forward(self, ids: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(ids.shape[1], device=ids.device).unsqueeze(0)
        hidden = self.token_emb(ids) + self.pos_emb(positions)
        return self.transformer(hidden, src_key_padding_mask=pad_mask)

    def hidden_states(self, token_id_lists: Sequence[Sequence[int]]) -> tuple[torch.Tensor, torch.Tensor]:
        """Last hidden states and pad mask for pre-tokenized id sequences."""
        batch, pad_mask = self._prepare(token_id_lists)
        return self(batch, pad_mask), pad_mask

    def embed_texts(self, texts: Sequence[str]) -> torch.Tensor:
        """Mean of the last hidden states of all tokens, one row per text."""
        id_lists = [self.vocab.encode(whitespace_tokenize(t)) for t in texts]
        hidden, pad_mask = self.hidden_states(id_lists)
        keep = (~pad_mask).unsqueeze(-1).float()
        summed = (hidden * keep).sum(dim=1)
        counts = keep.sum(dim=1).clamp(min=1.0)
        return summed / counts

    def cls_states(self, token_id_lists: Sequence[Sequence[int]]) -> torch.Tensor:
        """Last hidden state of a prepended [CLS] token per sequence."""
        with_cls = [[self.vocab.cls_id] + list(ids) for ids in token_id_lists]
        hidden, _ = self.hidden_states(with_cls)
        return hidden[:, 0, :]


class ClassificationHead(nn.Module):
    """Two-layer fully connected head on a sequence-level embedding."""

    def __init__(self, d_model: int, n_classes: int, hidden_size: int = 32):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(d_model, hidden_size),
            nn.ReLU(),
            nn.Linear(hidden_size, n_classes),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


def save_encoder(path: str | Path, encoder: TinyTextEncoder, meta: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "state_dict": encoder.state_dict(),
            "vocab": encoder.vocab.to_json(),
            "config": asdict(encoder.config),
            "meta": meta or {},
        },
        path,
    )


def load_encoder(path: str | Path) -> tuple[TinyTextEncoder, dict]:
    payload = torch.load(Path(path), map_location="cpu", weights_only=False)
    vocab = Vocab.from_json(payload["vocab"])
    encoder = TinyTextEncoder(vocab, EncoderConfig(**payload["config"]))
    encoder.load_state_dict(payload["state_dict"])
    encoder.eval()
    return encoder, payload.get("meta", {})


def build_base_encoder(
    texts: Iterable[str],
    config: EncoderConfig | None = None,
    seed: int = 0,
    max_vocab: int | None = None,
) -> TinyTextEncoder:
    """The shared starting checkpoint all task models are fine-tuned from."""
    vocab = Vocab.from_texts(texts, max_size=max_vocab)
    encoder = TinyTextEncoder(vocab, config, seed=seed)
    encoder.eval()
    return encoder


def metadata_path(model_path: str | Path) -> Path:
    return Path(model_path).with_suffix(Path(model_path).suffix + ".meta.json")


def write_metadata(model_path: str | Path, meta: dict) -> None:
    metadata_path(model_path).write_text(json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8")
