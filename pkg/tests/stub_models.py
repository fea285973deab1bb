"""Hand-controlled stand-ins for trained models.

``FixedEmbedder`` maps known texts to preset vectors so similarity-driven
code paths can be pinned to exact numbers.  ``embedder_from_gram`` builds
such vectors from a desired cosine (Gram) matrix via eigendecomposition,
which lets a test dictate every pairwise similarity at once.
``ScriptedGenerator`` replays canned continuations for decode endpoints.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
import torch


class FixedEmbedder:
    """Duck-typed replacement for a text encoder's ``embed_texts``."""

    def __init__(self, table: dict[str, Sequence[float]]):
        self._table = {k: torch.tensor(v, dtype=torch.float32) for k, v in table.items()}

    def embed_texts(self, texts: Sequence[str]) -> torch.Tensor:
        rows = []
        for text in texts:
            if text not in self._table:
                raise KeyError(f"no preset vector for {text!r}")
            rows.append(self._table[text])
        return torch.stack(rows)


def embedder_from_gram(texts: Sequence[str], gram: Sequence[Sequence[float]]) -> FixedEmbedder:
    """Embedder whose unit vectors realize the given cosine matrix.

    ``gram`` must be symmetric positive semi-definite with unit diagonal;
    vectors are rows of ``U @ sqrt(diag(w))`` from the eigendecomposition.
    """
    g = np.asarray(gram, dtype=np.float64)
    if g.shape != (len(texts), len(texts)):
        raise ValueError("gram matrix shape must match number of texts")
    if not np.allclose(g, g.T):
        raise ValueError("gram matrix must be symmetric")
    eigvals, eigvecs = np.linalg.eigh(g)
    if eigvals.min() < -1e-9:
        raise ValueError("gram matrix must be positive semi-definite")
    vectors = eigvecs @ np.diag(np.sqrt(np.clip(eigvals, 0.0, None)))
    realized = vectors @ vectors.T
    if not np.allclose(realized, g, atol=1e-9):
        raise AssertionError("factorization failed to reproduce the gram matrix")
    return FixedEmbedder({t: vectors[i] for i, t in enumerate(texts)})


class ScriptedGenerator:
    """Decode stub: returns ``script(prompt)`` and logs every call."""

    def __init__(self, script: Callable[[str], str]):
        self._script = script
        self.calls: list[dict] = []

    def generate(
        self, prompt: str, beam_width: int = 4, max_new_tokens: int = 75
    ) -> str:
        self.calls.append(
            {"prompt": prompt, "beam_width": beam_width, "max_new_tokens": max_new_tokens}
        )
        return self._script(prompt)
