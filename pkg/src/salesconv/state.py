"""Per-conversation state tracking with incremental updates.

The state is a fixed-width vector: a recency/importance-weighted history
embedding, the flattened features of the most recent turn, an engagement
moving average over customer turns, and the turn counter. Incremental
updates are the serving path; folding them from the initial state over a
full prefix is the reference semantics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .features import DEFAULT_DIM, FEATURE_WIDTH, EmbeddingVector, TurnFeatures, is_customer

# Turn counter is scaled by the generator's maximum conversation length
# when the state is flattened for the model.
TURN_NORM = 27.0

SPEED_SCORE = {"fast": 1.0, "normal": 0.5, "slow": 0.0}


@dataclass(frozen=True)
class StateConfig:
    dim: int = DEFAULT_DIM
    lambda_recency: float = 0.35
    w_objection: float = 1.5
    w_question: float = 1.2
    w_interest: float = 1.3
    w_other: float = 1.0
    engagement_ema: float = 0.3

    def __post_init__(self):
        if not (0.0 < self.lambda_recency <= 1.0):
            raise ValueError("lambda_recency must be in (0,1]")
        if not (0.0 < self.engagement_ema <= 1.0):
            raise ValueError("engagement_ema must be in (0,1]")


@dataclass
class StateVector:
    history: np.ndarray
    features_last: np.ndarray
    engagement: float
    turn_index: int

    @property
    def width(self) -> int:
        return len(self.history) + len(self.features_last) + 2

    def to_array(self) -> np.ndarray:
        return np.concatenate(
            [
                self.history,
                self.features_last,
                [self.engagement, min(1.0, self.turn_index / TURN_NORM)],
            ]
        )


def state_width(dim: int = DEFAULT_DIM) -> int:
    return dim + FEATURE_WIDTH + 2


def init_state(config: StateConfig | None = None) -> StateVector:
    config = config or StateConfig()
    return StateVector(
        history=np.zeros(config.dim, dtype=np.float64),
        features_last=np.zeros(FEATURE_WIDTH, dtype=np.float64),
        engagement=0.5,
        turn_index=0,
    )


def _importance(feats: TurnFeatures, config: StateConfig) -> float:
    triggered = [config.w_other]
    if feats.objection_flags:
        triggered.append(config.w_objection)
    if feats.question_density > 0.0:
        triggered.append(config.w_question)
    if feats.interest_flag:
        triggered.append(config.w_interest)
    return max(triggered)


def update_state(
    state: StateVector,
    embedding: EmbeddingVector | np.ndarray,
    feats: TurnFeatures,
    config: StateConfig | None = None,
) -> StateVector:
    config = config or StateConfig()
    values = embedding.values if isinstance(embedding, EmbeddingVector) else np.asarray(embedding)
    if values.shape != state.history.shape:
        raise DimensionError(
            f"embedding dimension {values.shape} does not match state {state.history.shape}"
        )

    w = _importance(feats, config)
    lam = config.lambda_recency
    history = (1.0 - lam) * state.history + lam * w * values
    norm = float(np.linalg.norm(history))
    if norm > 0.0:
        history = history / norm

    engagement = state.engagement
    if is_customer(feats):
        speed = SPEED_SCORE[feats.response_time_bucket]
        turn_engagement = min(1.0, max(0.0, 0.5 * feats.message_length_norm + 0.5 * speed))
        eta = config.engagement_ema
        engagement = (1.0 - eta) * engagement + eta * turn_engagement

    return StateVector(
        history=history,
        features_last=feats.to_array(),
        engagement=engagement,
        turn_index=state.turn_index + 1,
    )


def encode_full(
    prefix: list[tuple[EmbeddingVector, TurnFeatures]],
    config: StateConfig | None = None,
) -> StateVector:
    """Reference semantics: fold update_state from the initial state."""
    config = config or StateConfig()
    state = init_state(config)
    for embedding, feats in prefix:
        state = update_state(state, embedding, feats, config)
    return state
