from __future__ import annotations

import numpy as np
import pytest

from salesconv.convo import Conversation, Turn
from salesconv.errors import DataError, FormatVersionError
from salesconv.features import EmbeddingCache, embed_text, extract_turn_features, load_lexicons
from salesconv.model import TrainingConfig, quantize
from salesconv.pipeline import (
    Artifacts,
    Runtime,
    conversation_states,
    dataset_vocabulary,
    encode_dataset,
    ensemble_mean_probs,
    estimate_for_state,
    evaluate_conversation,
    evaluate_encoded,
    index_from_encoded,
    load_runtime,
    save_artifacts,
    train_features_only,
)
from salesconv.state import StateConfig, init_state, update_state
from salesconv.synthgen import GeneratorConfig, generate_conversation


def test_conversation_states_match_manual_fold(lexicons):
    conv = generate_conversation(GeneratorConfig(), 3)
    config = StateConfig()
    states = conversation_states(conv, 256, config, lexicons)
    assert states.shape == (len(conv.turns), 256 + 12 + 2)
    s = init_state(config)
    prev = None
    for i, turn in enumerate(conv.turns):
        emb = embed_text(turn.text, 256)
        feats = extract_turn_features(turn, prev, lexicons)
        s = update_state(s, emb, feats, config)
        assert np.array_equal(states[i], s.to_array())
        prev = turn


def test_encode_dataset_requires_outcomes():
    conv = Conversation(
        id="x",
        industry="saas",
        turns=[Turn("rep", "hi", 0, 0)],
        outcome=None,
    )
    with pytest.raises(DataError):
        encode_dataset([conv])


def test_index_respects_cap(small_encoded, small_corpus):
    vocab = dataset_vocabulary(small_corpus)
    index = index_from_encoded(small_encoded, vocab, 256, max_entries=100)
    assert len(index) <= 100
    assert index.matrix.shape[1] == 256


def test_vocabulary_contains_template_words(small_corpus):
    vocab = dataset_vocabulary(small_corpus)
    assert "budget" in vocab or "pricing" in vocab


def test_estimate_matches_batch_probabilities(small_runtime, small_corpus):
    runtime = Runtime(
        models=small_runtime.models,
        quantized=small_runtime.quantized,
        index=small_runtime.index,
        use_quantized=False,
        cache=EmbeddingCache(capacity=64),
    )
    conv = small_corpus[0]
    estimates = evaluate_conversation(runtime, conv)
    encoded = encode_dataset([conv])
    batch = evaluate_encoded(runtime.models, encoded)
    assert np.allclose(
        [e.probability for e in estimates], batch.per_turn_probs[0], atol=1e-9
    )


def test_quantized_runtime_used_when_enabled(small_runtime, small_corpus):
    conv = small_corpus[1]
    quant_estimates = evaluate_conversation(small_runtime, conv)
    float_runtime = Runtime(
        models=small_runtime.models,
        quantized=small_runtime.quantized,
        index=small_runtime.index,
        use_quantized=False,
        cache=EmbeddingCache(capacity=64),
    )
    float_estimates = evaluate_conversation(float_runtime, conv)
    diffs = [abs(a.probability - b.probability) for a, b in zip(quant_estimates, float_estimates)]
    assert max(diffs) > 0.0  # int8 actually in use
    assert max(diffs) < 0.1


def test_artifacts_round_trip(tmp_path, small_models, small_index):
    artifacts = Artifacts(
        models=small_models,
        quantized=[quantize(m) for m in small_models],
        index=small_index,
        reports=[],
        train_config=TrainingConfig(ensemble_k=2),
        state_config=StateConfig(),
        dim=256,
    )
    save_artifacts(artifacts, tmp_path / "arts")
    runtime = load_runtime(tmp_path / "arts", use_quantized=False)
    assert len(runtime.models) == len(small_models)
    for a, b in zip(runtime.models, small_models):
        for name, tensor in b.tensors().items():
            assert np.allclose(a.tensors()[name], tensor, atol=1e-6)
    assert len(runtime.index) == len(small_index)


def test_load_runtime_missing_manifest(tmp_path):
    with pytest.raises(DataError):
        load_runtime(tmp_path)


def test_load_runtime_bad_version(tmp_path, small_models, small_index):
    artifacts = Artifacts(
        models=small_models[:1],
        quantized=[quantize(small_models[0])],
        index=small_index,
        reports=[],
        train_config=TrainingConfig(),
        state_config=StateConfig(),
        dim=256,
    )
    save_artifacts(artifacts, tmp_path / "arts")
    manifest = (tmp_path / "arts" / "manifest.json")
    manifest.write_text(manifest.read_text().replace('"format_version": 1', '"format_version": 77'))
    with pytest.raises(FormatVersionError):
        load_runtime(tmp_path / "arts")


def test_features_only_model_shapes(small_encoded):
    model = train_features_only(small_encoded[:60], 256, seed=1)
    assert model.input_dim == 12
    ev = evaluate_encoded([model], small_encoded[:20], features_only=True)
    assert len(ev.final_probs) == 20


def test_estimate_for_state_confidence_fields(small_runtime):
    state = init_state(small_runtime.state_config)
    state = update_state(
        state,
        embed_text("tell me more about pricing", 256),
        extract_turn_features(
            Turn("customer", "tell me more about pricing", 1, 500), None, load_lexicons()
        ),
        small_runtime.state_config,
    )
    est = estimate_for_state(small_runtime, state, {"pricing"})
    assert 0.0 < est.probability < 1.0
    assert 0.0 <= est.confidence <= 1.0
    assert est.breakdown.novelty == 0.0 or est.breakdown.novelty <= 1.0


def test_ensemble_mean_is_member_average(small_models, small_encoded):
    X = small_encoded[0].states.astype(np.float64)
    from salesconv.model import predict_batch

    mean = ensemble_mean_probs(small_models, X)
    manual = np.mean([predict_batch(m, X) for m in small_models], axis=0)
    assert np.allclose(mean, manual, atol=1e-12)
