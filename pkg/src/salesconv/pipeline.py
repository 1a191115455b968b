"""End-to-end glue: conversation encoding, artifact training/persistence,
and the runtime predictor shared by offline evaluation and serving.

The deployed probability is the ensemble mean; the training-state index
backs the confidence estimate attached to every prediction. Serving uses
the int8 models; offline evaluation of a single conversation takes the
identical code path, which is what makes streaming and batch results
exactly equal.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .convo import Conversation
from .errors import DataError, FormatVersionError
from .features import (
    DEFAULT_DIM,
    EmbeddingCache,
    Lexicons,
    TurnFeatures,
    content_tokens,
    embed_cached,
    extract_turn_features,
    load_lexicons,
)
from .meta import (
    ConversionEstimate,
    StateIndex,
    build_index,
    estimate_confidence,
    load_index,
    save_index,
)
from .model import (
    EncodedConversation,
    PolicyModel,
    QuantizedModel,
    TrainingConfig,
    TrainingReport,
    load_model,
    predict_batch,
    quantize,
    save_model,
    train_member,
)
from .state import StateConfig, StateVector, encode_full, init_state, update_state

ARTIFACT_FORMAT_VERSION = 1
DEFAULT_INDEX_MAX = 20000


# --- encoding ---------------------------------------------------------------

def conversation_pairs(
    conv: Conversation,
    dim: int,
    lexicons: Lexicons,
    cache: EmbeddingCache | None = None,
) -> list[tuple[np.ndarray, TurnFeatures]]:
    pairs = []
    prev = None
    for turn in conv.turns:
        emb = embed_cached(turn.text, dim, cache)
        feats = extract_turn_features(turn, prev, lexicons)
        pairs.append((emb.values, feats))
        prev = turn
    return pairs


def conversation_states(
    conv: Conversation,
    dim: int,
    state_config: StateConfig,
    lexicons: Lexicons,
    cache: EmbeddingCache | None = None,
) -> np.ndarray:
    """State vector after each turn, stacked (turns, dim+F+2)."""
    state = init_state(state_config)
    rows = []
    prev = None
    for turn in conv.turns:
        emb = embed_cached(turn.text, dim, cache)
        feats = extract_turn_features(turn, prev, lexicons)
        state = update_state(state, emb.values, feats, state_config)
        rows.append(state.to_array())
        prev = turn
    return np.stack(rows)


def encode_dataset(
    conversations: list[Conversation],
    dim: int = DEFAULT_DIM,
    state_config: StateConfig | None = None,
    lexicons: Lexicons | None = None,
    cache: EmbeddingCache | None = None,
) -> list[EncodedConversation]:
    state_config = state_config or StateConfig(dim=dim)
    lexicons = lexicons or load_lexicons()
    cache = cache if cache is not None else EmbeddingCache(capacity=65536)
    encoded = []
    for conv in conversations:
        if conv.outcome is None:
            raise DataError(f"conversation {conv.id} has no outcome; cannot train/evaluate")
        states = conversation_states(conv, dim, state_config, lexicons, cache)
        encoded.append(
            EncodedConversation(
                conversation_id=conv.id,
                industry=conv.industry,
                states=states.astype(np.float32),
                outcome=bool(conv.outcome),
                trace=np.array(conv.propensity_trace) if conv.propensity_trace else None,
                adversarial=conv.adversarial,
            )
        )
    return encoded


def dataset_vocabulary(conversations: list[Conversation]) -> set[str]:
    vocab: set[str] = set()
    for conv in conversations:
        for turn in conv.turns:
            vocab |= content_tokens(turn.text)
    return vocab


def index_from_encoded(
    encoded: list[EncodedConversation],
    vocabulary: set[str],
    dim: int,
    max_entries: int = DEFAULT_INDEX_MAX,
) -> StateIndex:
    """Index the history components of training states, strided down to the cap."""
    entries = []
    for conv in encoded:
        for t in range(len(conv.states)):
            entries.append((conv, t))
    stride = max(1, int(np.ceil(len(entries) / max_entries)))
    picked = entries[::stride][:max_entries]
    states = [
        (conv.states[t, :dim].astype(np.float32), conv.conversation_id, t, conv.outcome)
        for conv, t in picked
    ]
    return build_index(states, vocabulary)


# --- runtime ----------------------------------------------------------------

@dataclass
class Runtime:
    models: list[PolicyModel]            # float ensemble, seed order
    quantized: list[QuantizedModel]
    index: StateIndex
    dim: int = DEFAULT_DIM
    state_config: StateConfig = field(default_factory=StateConfig)
    lexicons: Lexicons = field(default_factory=load_lexicons)
    use_quantized: bool = True
    cache: EmbeddingCache = field(default_factory=lambda: EmbeddingCache(capacity=8192))

    def active_models(self) -> list[PolicyModel]:
        if self.use_quantized:
            return [q.as_model() for q in self.quantized]
        return self.models


def estimate_for_state(
    runtime: Runtime,
    state: StateVector,
    last_turn_tokens: set[str] | frozenset[str],
) -> ConversionEstimate:
    x = state.to_array()
    probs = [float(predict_batch(m, x[None, :])[0]) for m in runtime.active_models()]
    probability = float(np.mean(probs))
    breakdown = estimate_confidence(state.history, runtime.index, probs, last_turn_tokens)
    return ConversionEstimate(
        probability=probability, confidence=breakdown.confidence, breakdown=breakdown
    )


def evaluate_conversation(runtime: Runtime, conv: Conversation) -> list[ConversionEstimate]:
    """Offline per-turn estimates; the reference for the streaming path."""
    state = init_state(runtime.state_config)
    estimates = []
    prev = None
    for turn in conv.turns:
        emb = embed_cached(turn.text, runtime.dim, runtime.cache)
        feats = extract_turn_features(turn, prev, runtime.lexicons)
        state = update_state(state, emb.values, feats, runtime.state_config)
        estimates.append(estimate_for_state(runtime, state, content_tokens(turn.text)))
        prev = turn
    return estimates


# --- batch evaluation ---------------------------------------------------------

def ensemble_mean_probs(models: list[PolicyModel], X: np.ndarray) -> np.ndarray:
    acc = np.zeros(len(X))
    for m in models:
        acc += predict_batch(m, X)
    return acc / len(models)


@dataclass
class DatasetEvaluation:
    final_probs: np.ndarray
    outcomes: np.ndarray
    per_turn_probs: list[np.ndarray]
    traces: list[np.ndarray] | None

    def metric_dict(self) -> dict:
        from . import metrics

        out = {
            "final_accuracy": metrics.accuracy(self.final_probs, self.outcomes),
            "final_auc": metrics.auc(self.final_probs, self.outcomes),
            "final_ece": metrics.ece(self.final_probs, self.outcomes),
        }
        if self.traces is not None:
            out["tracking_mae"] = metrics.tracking_mae(self.per_turn_probs, self.traces)
            out["mae_by_turn_index"] = metrics.mae_by_turn_index(
                self.per_turn_probs, self.traces
            ).tolist()
        out["accuracy_by_turn_index"] = metrics.accuracy_by_turn_index(
            self.per_turn_probs, [bool(o) for o in self.outcomes]
        ).tolist()
        return out


def evaluate_encoded(
    models: list[PolicyModel],
    encoded: list[EncodedConversation],
    dim: int = DEFAULT_DIM,
    zero_history: bool = False,
    features_only: bool = False,
) -> DatasetEvaluation:
    """Batch per-turn probabilities for a dataset under a predictor variant."""
    X = np.concatenate([c.states for c in encoded]).astype(np.float64)
    if zero_history:
        X = X.copy()
        X[:, :dim] = 0.0
    if features_only:
        X = X[:, dim:-2]
    probs = ensemble_mean_probs(models, X)

    per_turn: list[np.ndarray] = []
    offset = 0
    for c in encoded:
        per_turn.append(probs[offset : offset + len(c)])
        offset += len(c)
    final = np.array([p[-1] for p in per_turn])
    outcomes = np.array([float(c.outcome) for c in encoded])
    traces = None
    if all(c.trace is not None for c in encoded):
        traces = [c.trace for c in encoded]
    return DatasetEvaluation(
        final_probs=final, outcomes=outcomes, per_turn_probs=per_turn, traces=traces
    )


def train_features_only(
    encoded: list[EncodedConversation], dim: int, seed: int = 0
) -> PolicyModel:
    """Baseline trained on the last turn's flattened features alone."""
    sliced = [
        dataclasses.replace(c, states=np.ascontiguousarray(c.states[:, dim:-2])) for c in encoded
    ]
    model, _ = train_member(sliced, TrainingConfig(seed=seed))
    return model


def cache_timing(runtime: Runtime, conversations: list[Conversation]) -> dict:
    """Mean per-turn wall time with the embedding cache on versus off."""
    warm = dataclasses.replace(runtime, cache=EmbeddingCache(capacity=65536))
    cold = dataclasses.replace(runtime, cache=None)
    n_turns = sum(len(c.turns) for c in conversations)

    for conv in conversations:  # warm the cache, then time
        evaluate_conversation(warm, conv)
    t0 = time.perf_counter()
    for conv in conversations:
        evaluate_conversation(warm, conv)
    cached_ms = (time.perf_counter() - t0) * 1000.0 / max(1, n_turns)

    t0 = time.perf_counter()
    for conv in conversations:
        evaluate_conversation(cold, conv)
    uncached_ms = (time.perf_counter() - t0) * 1000.0 / max(1, n_turns)
    return {
        "cached_ms_per_turn": cached_ms,
        "uncached_ms_per_turn": uncached_ms,
        "sample_turns": n_turns,
    }


def mean_final_confidence(runtime: Runtime, conversations: list[Conversation]) -> float:
    total = 0.0
    for conv in conversations:
        estimates = evaluate_conversation(runtime, conv)
        total += estimates[-1].confidence
    return total / len(conversations)


# --- artifacts ----------------------------------------------------------------

@dataclass
class Artifacts:
    models: list[PolicyModel]
    quantized: list[QuantizedModel]
    index: StateIndex
    reports: list[TrainingReport]
    train_config: TrainingConfig
    state_config: StateConfig
    dim: int


def train_artifacts(
    train_conversations: list[Conversation],
    adversarial_conversations: list[Conversation],
    train_config: TrainingConfig,
    dim: int = DEFAULT_DIM,
    state_config: StateConfig | None = None,
    index_max: int = DEFAULT_INDEX_MAX,
) -> Artifacts:
    state_config = state_config or StateConfig(dim=dim)
    encoded = encode_dataset(train_conversations, dim, state_config)
    encoded_adv = encode_dataset(adversarial_conversations, dim, state_config)
    full = encoded + encoded_adv

    models, reports = [], []
    for i in range(train_config.ensemble_k):
        member_config = dataclasses.replace(train_config, seed=train_config.seed + i)
        model, report = train_member(full, member_config)
        models.append(model)
        reports.append(report)

    vocabulary = dataset_vocabulary(train_conversations)
    index = index_from_encoded(encoded, vocabulary, dim, max_entries=index_max)
    quantized = [quantize(m) for m in models]
    return Artifacts(
        models=models,
        quantized=quantized,
        index=index,
        reports=reports,
        train_config=train_config,
        state_config=state_config,
        dim=dim,
    )


def save_artifacts(artifacts: Artifacts, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: dict[str, list[str] | str] = {"models": [], "quantized": []}
    for i, m in enumerate(artifacts.models):
        name = f"model_{i}.json"
        save_model(m, out / name)
        files["models"].append(name)
    for i, q in enumerate(artifacts.quantized):
        name = f"quant_{i}.json"
        save_model(q, out / name)
        files["quantized"].append(name)
    save_index(artifacts.index, out / "index.json")
    files["index"] = "index.json"
    report_doc = {
        "format_version": ARTIFACT_FORMAT_VERSION,
        "members": [r.to_dict() for r in artifacts.reports],
    }
    (out / "report.json").write_text(json.dumps(report_doc, sort_keys=True), encoding="utf-8")
    files["report"] = "report.json"
    manifest = {
        "format_version": ARTIFACT_FORMAT_VERSION,
        "dim": artifacts.dim,
        "state_config": {
            "dim": artifacts.state_config.dim,
            "lambda_recency": artifacts.state_config.lambda_recency,
            "w_objection": artifacts.state_config.w_objection,
            "w_question": artifacts.state_config.w_question,
            "w_interest": artifacts.state_config.w_interest,
            "w_other": artifacts.state_config.w_other,
            "engagement_ema": artifacts.state_config.engagement_ema,
        },
        "train_config": {
            **{k: v for k, v in artifacts.train_config.__dict__.items()},
            "curriculum_stages": list(artifacts.train_config.curriculum_stages),
        },
        "created_unix": int(time.time()),
        "files": files,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")


def load_runtime(
    model_dir: str | Path,
    use_quantized: bool = True,
    cache_capacity: int = 8192,
) -> Runtime:
    d = Path(model_dir)
    manifest_path = d / "manifest.json"
    if not manifest_path.exists():
        raise DataError(f"no manifest.json under {d}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("format_version") != ARTIFACT_FORMAT_VERSION:
        raise FormatVersionError(
            f"unsupported artifact format version: {manifest.get('format_version')!r}"
        )
    models = [load_model(d / name) for name in manifest["files"]["models"]]
    quantized = [load_model(d / name) for name in manifest["files"]["quantized"]]
    index = load_index(d / manifest["files"]["index"])
    sc = manifest["state_config"]
    state_config = StateConfig(
        dim=int(sc["dim"]),
        lambda_recency=sc["lambda_recency"],
        w_objection=sc["w_objection"],
        w_question=sc["w_question"],
        w_interest=sc["w_interest"],
        w_other=sc["w_other"],
        engagement_ema=sc["engagement_ema"],
    )
    return Runtime(
        models=models,  # type: ignore[arg-type]
        quantized=quantized,  # type: ignore[arg-type]
        index=index,
        dim=int(manifest["dim"]),
        state_config=state_config,
        use_quantized=use_quantized,
        cache=EmbeddingCache(capacity=cache_capacity),
    )
