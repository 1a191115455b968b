from __future__ import annotations

import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from salesconv.convo import CUSTOMER, REP
from salesconv.errors import DimensionError
from salesconv.features import FEATURE_WIDTH, TurnFeatures, embed_text
from salesconv.state import StateConfig, encode_full, init_state, state_width, update_state


def feats(
    speaker=CUSTOMER,
    qd=0.0,
    mlen=0.3,
    sentiment=0.0,
    bucket="normal",
    objections=(),
    interest=False,
    techniques=(),
) -> TurnFeatures:
    return TurnFeatures(
        question_density=qd,
        message_length_norm=mlen,
        sentiment=sentiment,
        response_time_bucket=bucket,
        objection_flags=frozenset(objections),
        interest_flag=interest,
        technique_tags=frozenset(techniques),
        speaker=speaker,
    )


def test_init_state_fixture():
    s = init_state(StateConfig())
    assert np.all(s.history == 0.0)
    assert np.all(s.features_last == 0.0)
    assert s.engagement == 0.5
    assert s.turn_index == 0


def test_state_width():
    s = init_state(StateConfig(dim=64))
    assert s.width == 64 + FEATURE_WIDTH + 2 == state_width(64)
    assert s.to_array().shape == (state_width(64),)


def test_two_inits_identical():
    a, b = init_state(), init_state()
    assert np.array_equal(a.history, b.history)
    assert a.engagement == b.engagement


def test_lambda_one_forgets_history():
    config = StateConfig(dim=32, lambda_recency=1.0)
    s = init_state(config)
    e1 = embed_text("first message", 32)
    s = update_state(s, e1, feats(), config)
    e2 = embed_text("completely different words entirely", 32)
    s = update_state(s, e2, feats(), config)
    assert np.allclose(s.history, e2.values, atol=1e-12)


def test_zero_embedding_keeps_direction():
    config = StateConfig(dim=32)
    s = init_state(config)
    s = update_state(s, embed_text("hello world", 32), feats(), config)
    before = s.history.copy()
    s = update_state(s, np.zeros(32), feats(), config)
    assert np.allclose(s.history, before, atol=1e-12)


def test_dimension_mismatch_rejected():
    config = StateConfig(dim=32)
    s = init_state(config)
    with pytest.raises(DimensionError):
        update_state(s, np.zeros(16), feats(), config)


def test_importance_uses_max_kind_weight():
    config = StateConfig(dim=16, lambda_recency=0.5)
    base = init_state(config)
    e = embed_text("anything at all", 16)
    plain = update_state(base, e, feats(), config)
    flagged = update_state(base, e, feats(objections=("price",), qd=1.0), config)
    # first update from zero history normalizes both to the same direction
    assert np.allclose(plain.history, flagged.history, atol=1e-12)
    # second update: higher importance pulls harder toward the new embedding
    e2 = embed_text("other words now", 16)
    a = update_state(plain, e2, feats(), config)
    b = update_state(plain, e2, feats(objections=("price",)), config)
    cos_a = float(a.history @ e2.values)
    cos_b = float(b.history @ e2.values)
    assert cos_b > cos_a


def test_engagement_customer_only():
    config = StateConfig(dim=16)
    s = init_state(config)
    s_rep = update_state(s, embed_text("rep talk", 16), feats(speaker=REP, mlen=1.0, bucket="fast"), config)
    assert s_rep.engagement == 0.5
    s_cust = update_state(s, embed_text("cust talk", 16), feats(mlen=1.0, bucket="fast"), config)
    assert s_cust.engagement == pytest.approx(0.5 * 0.7 + 0.3 * 1.0)


def test_engagement_speed_scores():
    config = StateConfig(dim=16)
    s = init_state(config)
    slow = update_state(s, embed_text("x", 16), feats(mlen=0.0, bucket="slow"), config)
    assert slow.engagement == pytest.approx(0.35)


def test_turn_index_counts_updates():
    config = StateConfig(dim=16)
    s = init_state(config)
    for i in range(5):
        s = update_state(s, embed_text(f"turn {i}", 16), feats(), config)
    assert s.turn_index == 5


def test_history_norm_unit_or_zero():
    config = StateConfig(dim=32)
    s = init_state(config)
    rng = np.random.default_rng(5)
    for i in range(30):
        if i % 7 == 0:
            emb = np.zeros(32)
        else:
            emb = rng.normal(size=32)
            emb /= np.linalg.norm(emb)
        s = update_state(s, emb, feats(), config)
        norm = np.linalg.norm(s.history)
        assert norm == 0.0 or abs(norm - 1.0) <= 1e-6


def test_incremental_equals_full_recompute():
    config = StateConfig(dim=64)
    rng = np.random.default_rng(123)
    for trial in range(50):
        n = int(rng.integers(1, 27))
        pairs = []
        for i in range(n):
            emb = embed_text(f"words {trial} {i} " + "x" * int(rng.integers(0, 30)), 64)
            f = feats(
                speaker=CUSTOMER if rng.random() < 0.5 else REP,
                qd=float(rng.random()),
                mlen=float(rng.random()),
                bucket=("fast", "normal", "slow")[int(rng.integers(3))],
                objections=("price",) if rng.random() < 0.3 else (),
                interest=bool(rng.random() < 0.2),
            )
            pairs.append((emb, f))
        # incremental path
        s = init_state(config)
        for emb, f in pairs:
            s = update_state(s, emb, f, config)
        # reference path
        full = encode_full(pairs, config)
        assert np.abs(s.to_array() - full.to_array()).max() <= 1e-9


@settings(max_examples=100, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.floats(min_value=0, max_value=1),
            st.sampled_from(["fast", "normal", "slow"]),
            st.booleans(),
        ),
        max_size=40,
    )
)
def test_engagement_bounded(seq):
    config = StateConfig(dim=8)
    s = init_state(config)
    for mlen, bucket, is_customer in seq:
        f = feats(speaker=CUSTOMER if is_customer else REP, mlen=mlen, bucket=bucket)
        s = update_state(s, embed_text("m", 8), f, config)
        assert 0.0 <= s.engagement <= 1.0


def test_update_speed_under_50us():
    config = StateConfig(dim=256)
    s = init_state(config)
    emb = embed_text("a perfectly ordinary customer message about pricing", 256)
    f = feats()
    timings = []
    for _ in range(2000):
        t0 = time.perf_counter()
        s = update_state(s, emb, f, config)
        timings.append(time.perf_counter() - t0)
    timings.sort()
    median = timings[len(timings) // 2]
    assert median < 50e-6, f"median update {median*1e6:.1f}us"


def test_empty_prefix_is_init():
    full = encode_full([], StateConfig(dim=16))
    init = init_state(StateConfig(dim=16))
    assert np.array_equal(full.to_array(), init.to_array())


def test_single_turn_fold_base_case():
    config = StateConfig(dim=16)
    pair = (embed_text("one turn", 16), feats())
    full = encode_full([pair], config)
    manual = update_state(init_state(config), pair[0], pair[1], config)
    assert np.array_equal(full.to_array(), manual.to_array())
