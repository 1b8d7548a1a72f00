"""Top-k prompt selection by cosine similarity of image embeddings.

The default embedder is the trained backbone itself, run with zero
clicks and an empty mask, mean-pooled over tokens and L2-normalized. An
external embedder (e.g. a large self-supervised model) can be plugged in
out-of-band through a JSON sidecar mapping image id to a raw vector;
vectors are normalized on load.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autograd as ag
from .config import ConfigurationError


@dataclass
class Embedding:
    vector: np.ndarray  # unit L2 norm
    source_id: str


@dataclass
class SelectionResult:
    indices: list[int]  # most similar first
    scores: list[float]


def _normalize(vec: np.ndarray, what: str) -> np.ndarray:
    v = np.asarray(vec, dtype=np.float64).reshape(-1)
    norm = float(np.linalg.norm(v))
    if norm == 0.0 or not np.isfinite(norm):
        raise ValueError(f"cannot normalize embedding for {what}: norm={norm}")
    return v / norm


def embed_image(model, image: np.ndarray, source_id: str = "") -> Embedding:
    """Mean-pooled backbone tokens of the click-free, mask-free image."""
    if model is None:
        raise ConfigurationError("no embedder available: model not loaded and no sidecar supplied")
    s = model.cfg.image_size
    with ag.no_grad():
        item = model.encode(
            image,
            np.zeros((2, s, s), dtype=np.float32),
            np.zeros((1, s, s), dtype=np.float32),
        )
    pooled = item.features.tokens.data.mean(axis=0)
    return Embedding(vector=_normalize(pooled, source_id or "image"), source_id=source_id)


def select_topk(test: Embedding, candidates: list[Embedding], k: int) -> SelectionResult:
    """Rank candidates by cosine to the test embedding, descending.

    Ties break toward the lower candidate index; returns min(k, len) items.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0 or not candidates:
        return SelectionResult(indices=[], scores=[])
    mat = np.stack([c.vector for c in candidates])
    scores = mat @ test.vector  # unit vectors: dot == cosine
    order = np.argsort(-scores, kind="stable")[: min(k, len(candidates))]
    return SelectionResult(indices=[int(i) for i in order], scores=[float(scores[i]) for i in order])


def load_embedding_sidecar(path: str | Path) -> dict[str, Embedding]:
    """JSON {image id -> vector}; values normalized on load."""
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, dict):
        raise ValueError("embedding sidecar must be a JSON object")
    return {k: Embedding(vector=_normalize(v, k), source_id=k) for k, v in raw.items()}


def save_embedding_sidecar(path: str | Path, embeddings: dict[str, Embedding]) -> None:
    payload = {k: [float(x) for x in e.vector] for k, e in embeddings.items()}
    Path(path).write_text(json.dumps(payload) + "\n")
