"""Confidence estimation: the system's own reliability signal.

Confidence blends three observables: mean cosine similarity of the current
history vector to its nearest training states, disagreement across the
model ensemble, and the share of unseen content tokens in the latest turn.
The blend is normative for this artifact:

    confidence = clamp01(0.5*similarity + 0.5*(1 - 2*ensemble_std) - 0.25*novelty)

This layer is also what aggregates the ensemble into one served
probability; stored states keep their conversation outcome so a
nearest-neighbour outcome rate is available as a diagnostic prior.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DataError, FormatVersionError

INDEX_FORMAT_VERSION = 1
DEFAULT_TOP_K = 16

SIMILARITY_WEIGHT = 0.5
SPREAD_WEIGHT = 0.5
NOVELTY_WEIGHT = 0.25


@dataclass
class IndexEntry:
    vector: np.ndarray
    conversation_id: str
    turn_index: int
    outcome: bool


@dataclass
class ConfidenceBreakdown:
    similarity: float
    ensemble_std: float
    novelty: float
    confidence: float

    def to_dict(self) -> dict:
        return {
            "similarity": self.similarity,
            "ensemble_std": self.ensemble_std,
            "novelty": self.novelty,
            "confidence": self.confidence,
        }


@dataclass
class ConversionEstimate:
    probability: float
    confidence: float
    breakdown: ConfidenceBreakdown

    def to_dict(self) -> dict:
        return {
            "probability": self.probability,
            "confidence": self.confidence,
            "breakdown": self.breakdown.to_dict(),
        }


class StateIndex:
    """Exact brute-force cosine index over unit-norm (or zero) history vectors."""

    def __init__(self, matrix: np.ndarray, ids: list[str], turn_indices: list[int],
                 outcomes: np.ndarray, vocabulary: frozenset[str]):
        self.matrix = matrix  # (n, dim) float32
        self.ids = ids
        self.turn_indices = turn_indices
        self.outcomes = outcomes  # (n,) float32
        self.vocabulary = vocabulary

    def __len__(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def query(self, vector: np.ndarray, k: int = DEFAULT_TOP_K) -> tuple[np.ndarray, np.ndarray]:
        """Top-k cosine matches; returns (similarities, row indices), best first.

        Stored vectors are unit norm, so cosine reduces to a dot product with
        the normalized query; ties break toward the lower row index.
        """
        q = np.asarray(vector, dtype=np.float32)
        norm = float(np.linalg.norm(q))
        if norm > 0:
            q = q / norm
        sims = self.matrix @ q
        k = min(k, len(sims))
        # stable selection: sort by (-sim, row) for deterministic ties
        idx = np.lexsort((np.arange(len(sims)), -sims))[:k]
        return sims[idx], idx


class ApproximateIndex:
    """Interface placeholder for a future sublinear index."""

    def query(self, vector: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError


def build_index(
    states: list[tuple[np.ndarray, str, int, bool]],
    vocabulary: set[str] | frozenset[str],
) -> StateIndex:
    """Store history components with provenance plus the training vocabulary.

    Each entry is (history_vector, conversation_id, turn_index, outcome).
    """
    if not states:
        raise DataError("cannot build an index from zero states")
    matrix = np.stack([np.asarray(v, dtype=np.float32) for v, _, _, _ in states])
    ids = [cid for _, cid, _, _ in states]
    turns = [t for _, _, t, _ in states]
    outcomes = np.array([float(o) for _, _, _, o in states], dtype=np.float32)
    return StateIndex(matrix, ids, turns, outcomes, frozenset(vocabulary))


def estimate_confidence(
    state_history: np.ndarray,
    index: StateIndex,
    ensemble_probs: list[float] | np.ndarray,
    last_turn_tokens: set[str] | frozenset[str],
    k: int = DEFAULT_TOP_K,
) -> ConfidenceBreakdown:
    probs = np.asarray(ensemble_probs, dtype=np.float64)
    if probs.size < 2:
        raise ConfigurationError("confidence needs at least 2 ensemble probabilities")

    sims, _ = index.query(state_history, k=k)
    similarity = float((sims.mean() + 1.0) / 2.0) if len(sims) else 0.5

    spread = float(probs.std())  # population std; <= 0.5 for values in [0,1]

    tokens = set(last_turn_tokens)
    if tokens:
        unseen = sum(1 for t in tokens if t not in index.vocabulary)
        novelty = unseen / len(tokens)
    else:
        novelty = 0.0

    raw = (
        SIMILARITY_WEIGHT * similarity
        + SPREAD_WEIGHT * (1.0 - 2.0 * spread)
        - NOVELTY_WEIGHT * novelty
    )
    confidence = min(1.0, max(0.0, raw))
    return ConfidenceBreakdown(
        similarity=similarity, ensemble_std=spread, novelty=novelty, confidence=confidence
    )


KNN_PRIOR_K = 32
KNN_PRIOR_SHARPNESS = 8.0


def neighbour_weights(sims: np.ndarray) -> np.ndarray:
    """Similarity weights for the outcome prior; closest neighbours dominate."""
    return np.power(np.clip((sims + 1.0) / 2.0, 0.0, 1.0), KNN_PRIOR_SHARPNESS)


def neighbour_outcome_rate(
    index: StateIndex, state_history: np.ndarray, k: int = KNN_PRIOR_K
) -> float:
    """Similarity-weighted outcome rate of the k nearest training states."""
    sims, rows = index.query(state_history, k=k)
    if len(rows) == 0:
        return 0.5
    w = neighbour_weights(sims)
    total = float(w.sum())
    if total <= 0.0:
        return float(index.outcomes[rows].mean())
    return float((w * index.outcomes[rows]).sum() / total)


def save_index(index: StateIndex, path: str | Path) -> None:
    doc = {
        "format_version": INDEX_FORMAT_VERSION,
        "kind": "state_index",
        "sections": {
            "vectors": {
                "shape": list(index.matrix.shape),
                "dtype": "<f4",
                "data": base64.b64encode(index.matrix.astype("<f4").tobytes()).decode("ascii"),
            },
            "ids": index.ids,
            "turn_indices": index.turn_indices,
            "outcomes": [float(o) for o in index.outcomes],
            "vocabulary": sorted(index.vocabulary),
        },
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")


def load_index(path: str | Path) -> StateIndex:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format_version") != INDEX_FORMAT_VERSION:
        raise FormatVersionError(f"unsupported index format version: {doc.get('format_version')!r}")
    sec = doc["sections"]
    matrix = (
        np.frombuffer(base64.b64decode(sec["vectors"]["data"]), dtype="<f4")
        .reshape(sec["vectors"]["shape"])
        .copy()
    )
    return StateIndex(
        matrix=matrix,
        ids=list(sec["ids"]),
        turn_indices=[int(t) for t in sec["turn_indices"]],
        outcomes=np.array(sec["outcomes"], dtype=np.float32),
        vocabulary=frozenset(sec["vocabulary"]),
    )
