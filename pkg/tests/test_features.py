from __future__ import annotations

import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from salesconv import templates as tpl
from salesconv.convo import CUSTOMER, REP, Turn
from salesconv.errors import ConfigurationError, DimensionError, ProviderUnavailableError
from salesconv.features import (
    EmbeddingCache,
    ProviderSettings,
    cache_key,
    embed_cached,
    embed_external,
    embed_grams_raw,
    embed_text,
    embed_text_raw,
    extract_turn_features,
    fnv1a64,
    load_lexicons,
    token_grams,
    tokenize,
)


def reference_fnv1a64(data: bytes) -> int:
    """Independent FNV-1a reference: xor byte, multiply by prime, mod 2^64."""
    h = 14695981039346656037
    for b in data:
        h = ((h ^ b) * 1099511628211) % (1 << 64)
    return h


def turn(text: str, speaker: str = CUSTOMER, latency: int = 1000) -> Turn:
    return Turn(speaker=speaker, text=text, timestamp_ms=1000, response_latency_ms=latency)


# --- hashed embeddings -------------------------------------------------------

def test_fnv_matches_reference():
    for token in ("hello", "world", "hello world", "a", ""):
        assert fnv1a64(token.encode()) == reference_fnv1a64(token.encode())


def test_empty_text_zero_vector():
    v = embed_text("", 64)
    assert np.all(v.values == 0.0)


def test_embedding_deterministic():
    a = embed_text("tell me more about pricing", 128)
    b = embed_text("tell me more about pricing", 128)
    assert np.array_equal(a.values, b.values)


def test_hello_world_slots_match_reference():
    d = 256
    raw = embed_text_raw("hello world", d)
    expected = np.zeros(d)
    for gram in ("hello", "world", "hello world"):
        h = reference_fnv1a64(gram.encode())
        sign = -1.0 if (h >> 63) & 1 else 1.0
        expected[h % d] += sign
    assert np.array_equal(raw, expected)
    assert set(np.nonzero(raw)[0]) == {reference_fnv1a64(g.encode()) % d for g in ("hello", "world", "hello world")}


def test_normalized_unit_norm():
    v = embed_text("the quick brown fox", 256)
    assert abs(np.linalg.norm(v.values) - 1.0) <= 1e-6


def test_linear_in_token_multiset():
    d = 128
    g1 = token_grams(tokenize("price is steep today"))
    g2 = token_grams(tokenize("send the contract over"))
    combined = embed_grams_raw(g1 + g2, d)
    assert np.array_equal(combined, embed_grams_raw(g1, d) + embed_grams_raw(g2, d))


def test_cosine_self_similarity_one():
    v = embed_text("are you interested in a pilot", 256).values
    assert float(v @ v) == pytest.approx(1.0, abs=1e-9)


def test_small_dimension_rejected():
    with pytest.raises(ConfigurationError):
        embed_text("hi", 4)


# --- turn features ------------------------------------------------------------

def test_question_density_all_questions(lexicons):
    feats = extract_turn_features(turn("Are you interested? What's the budget?"), None, lexicons)
    assert feats.question_density == pytest.approx(1.0)


def test_question_density_mixed(lexicons):
    feats = extract_turn_features(turn("We are fine. Is that the plan?"), None, lexicons)
    assert feats.question_density == pytest.approx(0.5)


def test_sentiment_neutral_default(lexicons):
    feats = extract_turn_features(turn("The sky is blue over the harbor."), None, lexicons)
    assert feats.sentiment == 0.0


def test_objection_lexicon_price_flag(lexicons):
    feats = extract_turn_features(turn("That price is too expensive for us."), None, lexicons)
    assert "price" in feats.objection_flags


def test_interest_and_technique_flags(lexicons):
    feats = extract_turn_features(turn("Please tell me more about onboarding."), None, lexicons)
    assert feats.interest_flag
    rep = extract_turn_features(
        turn("What happens if the current process stays?", speaker=REP), None, lexicons
    )
    assert "spin" in rep.technique_tags


def test_response_time_buckets(lexicons):
    assert extract_turn_features(turn("ok", latency=1999), None, lexicons).response_time_bucket == "fast"
    assert extract_turn_features(turn("ok", latency=2000), None, lexicons).response_time_bucket == "normal"
    assert extract_turn_features(turn("ok", latency=9999), None, lexicons).response_time_bucket == "normal"
    assert extract_turn_features(turn("ok", latency=10000), None, lexicons).response_time_bucket == "slow"


def test_message_length_norm_caps(lexicons):
    feats = extract_turn_features(turn("x" * 1000), None, lexicons)
    assert feats.message_length_norm == 1.0


def test_feature_array_width(lexicons):
    feats = extract_turn_features(turn("Anything at all."), None, lexicons)
    assert feats.to_array().shape == (12,)


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=400))
def test_extraction_total_no_errors(text):
    lexicons = load_lexicons()
    feats = extract_turn_features(turn(text or "x"), None, lexicons)
    assert 0.0 <= feats.question_density <= 1.0
    assert 0.0 <= feats.message_length_norm <= 1.0
    assert -1.0 <= feats.sentiment <= 1.0
    assert feats.response_time_bucket in ("fast", "normal", "slow")


# --- template/lexicon cross-checks ---------------------------------------------

def _clause_sentiment(text: str, lexicons) -> float:
    weights = [lexicons.sentiment[t] for t in tokenize(text) if t in lexicons.sentiment]
    return sum(weights) / len(weights) if weights else 0.0


def test_flavor_clauses_carry_their_polarity(lexicons):
    for flavor, clauses in tpl.FLAVOR_CLAUSES.items():
        for clause in clauses:
            s = _clause_sentiment(clause, lexicons)
            if flavor in ("pos", "very_pos"):
                assert s > 0, clause
            elif flavor in ("neg", "very_neg"):
                assert s < 0, clause
            else:
                assert s == 0, clause


def test_event_clauses_are_sentiment_neutral(lexicons):
    banks = [
        *[c for v in tpl.CUSTOMER_OBJECTION_RAISE.values() for c in v],
        *[c for v in tpl.CUSTOMER_OBJECTION_RESOLVE.values() for c in v],
        *tpl.CUSTOMER_INTEREST,
        *tpl.CUSTOMER_QUESTION,
        *tpl.CUSTOMER_SMALLTALK,
        *tpl.CUSTOMER_ELABORATIONS,
    ]
    for clause in banks:
        assert _clause_sentiment(clause.replace("{product}", "plan"), lexicons) == 0.0, clause


def test_objection_clauses_match_their_kind(lexicons):
    for kind, clauses in tpl.CUSTOMER_OBJECTION_RAISE.items():
        for clause in clauses:
            feats = extract_turn_features(turn(clause.replace("{product}", "plan")), None, lexicons)
            assert kind in feats.objection_flags, clause


# --- LRU cache -------------------------------------------------------------------

def test_cache_lru_semantics():
    cache = EmbeddingCache(capacity=2)
    a, b, c = (np.array([float(i)]) for i in range(3))
    cache.put(1, a)
    cache.put(2, b)
    assert cache.get(1) is not None  # refresh 1
    cache.put(3, c)
    assert cache.get(2) is None  # 2 was least recently used
    assert cache.get(1) is not None
    assert cache.get(3) is not None


def test_cache_empty_miss():
    cache = EmbeddingCache(capacity=1)
    assert cache.get(42) is None
    assert cache.misses == 1


def test_cache_random_ops_match_reference_oracle():
    rng = random.Random(404)
    cache = EmbeddingCache(capacity=16)
    reference: dict[int, np.ndarray] = {}
    recency: list[int] = []
    inserts = 0
    for _ in range(10000):
        key = rng.randrange(64)
        if rng.random() < 0.5:
            got = cache.get(key)
            if key in reference:
                assert got is not None and np.array_equal(got, reference[key])
                recency.remove(key)
                recency.append(key)
            else:
                assert got is None
        else:
            value = np.array([float(key)])
            cache.put(key, value)
            if key in reference:
                recency.remove(key)
            else:
                inserts += 1
                if len(reference) == 16:
                    evicted = recency.pop(0)
                    del reference[evicted]
            reference[key] = value
            recency.append(key)
        assert len(cache) <= 16
        assert len(cache) == len(reference)


def test_cache_eviction_count_distinct_keys():
    cache = EmbeddingCache(capacity=8)
    for key in range(30):
        cache.put(key, np.array([1.0]))
    assert cache.evictions == 30 - 8


def test_cache_capacity_validated():
    with pytest.raises(ConfigurationError):
        EmbeddingCache(capacity=0)


def test_embed_cached_round_trip():
    cache = EmbeddingCache(capacity=4)
    a = embed_cached("hello there", 64, cache)
    b = embed_cached("hello there", 64, cache)
    assert np.array_equal(a.values, b.values)
    assert cache.hits == 1


# --- external provider --------------------------------------------------------------

class MockProvider:
    def __init__(self, vector, fail=False):
        self.provider_id = "mock/test"
        self.vector = vector
        self.fail = fail
        self.calls = 0

    def embed(self, text):
        self.calls += 1
        if self.fail:
            raise RuntimeError("connection refused")
        return list(self.vector)


def test_external_provider_normalizes():
    provider = MockProvider([3.0, 4.0] + [0.0] * 14)
    v = embed_external("anything", provider, 16)
    assert np.linalg.norm(v.values) == pytest.approx(1.0)
    assert v.values[0] == pytest.approx(0.6)


def test_external_provider_error_leaves_cache_untouched():
    provider = MockProvider([1.0] * 16, fail=True)
    cache = EmbeddingCache(capacity=4)
    with pytest.raises(ProviderUnavailableError):
        embed_external("x", provider, 16, cache)
    assert len(cache) == 0


def test_external_provider_cached_once():
    provider = MockProvider([1.0] * 16)
    cache = EmbeddingCache(capacity=4)
    embed_external("same text", provider, 16, cache)
    embed_external("same text", provider, 16, cache)
    assert provider.calls == 1


def test_external_provider_dimension_mismatch():
    provider = MockProvider([1.0] * 8)
    with pytest.raises(DimensionError):
        embed_external("x", provider, 16)


def test_provider_settings_require_env(monkeypatch):
    for var in (ProviderSettings.ENDPOINT_VAR, ProviderSettings.API_KEY_VAR, ProviderSettings.MODEL_VAR):
        monkeypatch.delenv(var, raising=False)
    with pytest.raises(ConfigurationError):
        ProviderSettings.from_env()
    monkeypatch.setenv(ProviderSettings.ENDPOINT_VAR, "http://localhost:1/embed")
    monkeypatch.setenv(ProviderSettings.API_KEY_VAR, "k")
    monkeypatch.setenv(ProviderSettings.MODEL_VAR, "m")
    settings_ = ProviderSettings.from_env()
    assert settings_.model == "m"


def test_cache_key_distinct_per_provider():
    assert cache_key("a", "text") != cache_key("b", "text")
