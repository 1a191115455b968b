from __future__ import annotations

import json
import socket
import threading
import urllib.request

import numpy as np
import pytest

from salesconv.convo import CUSTOMER, REP, Turn
from salesconv.errors import NotFoundError, ServiceUnavailableError, SessionClosedError
from salesconv.pipeline import evaluate_conversation
from salesconv.serve import (
    HttpServer,
    NdjsonServer,
    Service,
    SessionLog,
    handle_message,
)
from salesconv.state import init_state
from salesconv.synthgen import GeneratorConfig, generate_conversation


@pytest.fixture()
def service(small_runtime, guidance_engine, tmp_path):
    return Service(small_runtime, guidance_engine, log_path=tmp_path / "sessions.jsonl")


def fixture_conversation(seed=77):
    return generate_conversation(GeneratorConfig(), seed)


# --- sessions -----------------------------------------------------------------

def test_open_sessions_distinct_ids(service):
    a = service.open_session()
    b = service.open_session()
    assert a != b


def test_open_unknown_industry_recorded_verbatim(service):
    sid = service.open_session({"industry": "deep-sea-mining"})
    assert service.sessions[sid].industry == "deep-sea-mining"


def test_open_state_is_init_state(service, small_runtime):
    sid = service.open_session()
    expected = init_state(small_runtime.state_config)
    got = service.sessions[sid].state
    assert np.array_equal(got.to_array(), expected.to_array())


def test_no_model_service_unavailable(guidance_engine):
    svc = Service(None, guidance_engine)
    with pytest.raises(ServiceUnavailableError):
        svc.open_session()


def test_push_turn_matches_offline_evaluation(service, small_runtime):
    conv = fixture_conversation()
    sid = service.open_session({"industry": conv.industry})
    streamed = [service.push_turn(sid, t)[0] for t in conv.turns]
    offline = evaluate_conversation(small_runtime, conv)
    for s, o in zip(streamed, offline):
        assert s.probability == o.probability
        assert s.confidence == o.confidence
        assert s.breakdown.to_dict() == o.breakdown.to_dict()


def test_push_unknown_session(service):
    with pytest.raises(NotFoundError):
        service.push_turn("nope", fixture_conversation().turns[0])


def test_push_after_close_rejected_state_unchanged(service):
    conv = fixture_conversation()
    sid = service.open_session()
    service.push_turn(sid, conv.turns[0])
    state_before = service.sessions[sid].state.to_array().copy()
    service.close_session(sid, True)
    with pytest.raises(SessionClosedError):
        service.push_turn(sid, conv.turns[1])
    assert np.array_equal(service.sessions[sid].state.to_array(), state_before)


def test_close_twice_rejected(service):
    sid = service.open_session()
    service.push_turn(sid, fixture_conversation().turns[0])
    service.close_session(sid, None)
    with pytest.raises(SessionClosedError):
        service.close_session(sid, None)


def test_close_summary_fields(service):
    conv = fixture_conversation()
    sid = service.open_session()
    probs = [service.push_turn(sid, t)[0].probability for t in conv.turns]
    record = service.close_session(sid, conv.outcome)
    s = record["summary"]
    assert s["turns"] == len(conv.turns)
    assert s["probability_min"] == min(probs)
    assert s["probability_max"] == max(probs)
    assert s["probability_final"] == probs[-1]


def test_interleaved_sessions_keep_per_session_order(service, small_runtime):
    conv_a = fixture_conversation(1)
    conv_b = fixture_conversation(2)
    sid_a = service.open_session()
    sid_b = service.open_session()
    got_a, got_b = [], []
    for i in range(max(len(conv_a.turns), len(conv_b.turns))):
        if i < len(conv_a.turns):
            got_a.append(service.push_turn(sid_a, conv_a.turns[i])[0].probability)
        if i < len(conv_b.turns):
            got_b.append(service.push_turn(sid_b, conv_b.turns[i])[0].probability)
    ref_a = [e.probability for e in evaluate_conversation(small_runtime, conv_a)]
    ref_b = [e.probability for e in evaluate_conversation(small_runtime, conv_b)]
    assert got_a == ref_a
    assert got_b == ref_b


# --- session log -------------------------------------------------------------------

def test_log_round_trip(service, tmp_path):
    conv = fixture_conversation()
    sid = service.open_session()
    for t in conv.turns:
        service.push_turn(sid, t)
    record = service.close_session(sid, conv.outcome)
    reloaded = service.log.read_records()
    assert len(reloaded) == 1
    assert reloaded[0] == json.loads(json.dumps(record))


def test_log_ignores_uncommitted_tail(tmp_path):
    log = SessionLog(tmp_path / "log.jsonl")
    log.append({"session_id": "s1", "x": 1})
    with open(log.path, "a") as fh:
        fh.write(json.dumps({"v": 1, "type": "session", "record": {"session_id": "s2"}}) + "\n")
        # crash before commit marker
    records = log.read_records()
    assert [r["session_id"] for r in records] == ["s1"]


def test_log_ignores_torn_line(tmp_path):
    log = SessionLog(tmp_path / "log.jsonl")
    log.append({"session_id": "s1"})
    with open(log.path, "a") as fh:
        fh.write('{"v":1,"type":"session","record":{"session_id":"s2"')  # torn write
    assert [r["session_id"] for r in log.read_records()] == ["s1"]


# --- wire protocol --------------------------------------------------------------------

def test_handle_open_turn_close_sequence(service):
    replies = handle_message(service, {"type": "open", "payload": {"industry": "retail"}})
    assert replies[0]["type"] == "open"
    sid = replies[0]["session_id"]

    replies = handle_message(
        service,
        {
            "type": "turn",
            "session_id": sid,
            "payload": {"speaker": REP, "text": "Hi, shall we begin?", "response_latency_ms": 0},
        },
    )
    assert [r["type"] for r in replies] == ["estimate", "guidance"]
    assert 0.0 < replies[0]["payload"]["probability"] < 1.0
    assert set(replies[0]["payload"]["breakdown"]) == {
        "similarity",
        "ensemble_std",
        "novelty",
        "confidence",
    }

    replies = handle_message(service, {"type": "close", "session_id": sid, "payload": {"outcome": True}})
    assert replies[0]["type"] == "close"
    assert replies[0]["payload"]["outcome"] is True


def test_handle_unknown_session_error(service):
    replies = handle_message(
        service, {"type": "turn", "session_id": "ghost", "payload": {"speaker": REP, "text": "x"}}
    )
    assert replies[0]["type"] == "error"
    assert replies[0]["payload"]["code"] == "not_found"


def test_handle_unknown_type_error(service):
    replies = handle_message(service, {"type": "frobnicate"})
    assert replies[0]["type"] == "error"


def test_simulate_mode_reply_sequence(service):
    replies = handle_message(
        service, {"type": "open", "payload": {"industry": "saas", "simulate_customer": True, "seed": 5}}
    )
    sid = replies[0]["session_id"]
    replies = handle_message(
        service,
        {
            "type": "turn",
            "session_id": sid,
            "payload": {"speaker": REP, "text": "Hi, I wanted to walk through the workflow suite.", "response_latency_ms": 0},
        },
    )
    assert [r["type"] for r in replies] == ["estimate", "guidance", "turn", "estimate", "guidance"]
    assert replies[2]["payload"]["speaker"] == CUSTOMER
    assert replies[2]["payload"]["text"]


def test_simulate_mode_deterministic(small_runtime, guidance_engine):
    outs = []
    for _ in range(2):
        svc = Service(small_runtime, guidance_engine, simulate_seed=3)
        sid = handle_message(svc, {"type": "open", "payload": {"simulate_customer": True, "seed": 9}})[0][
            "session_id"
        ]
        replies = handle_message(
            svc,
            {
                "type": "turn",
                "session_id": sid,
                "payload": {"speaker": REP, "text": "Good morning, quick question on budget.", "response_latency_ms": 0},
            },
        )
        outs.append([r["payload"].get("text") for r in replies if r["type"] == "turn"])
    assert outs[0] == outs[1]


def test_ndjson_server_round_trip(service):
    server = NdjsonServer(("127.0.0.1", 0), service)
    port = server.server_address[1]
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        with socket.create_connection(("127.0.0.1", port), timeout=5) as sock:
            fh = sock.makefile("rwb")
            fh.write((json.dumps({"type": "open", "payload": {}}) + "\n").encode())
            fh.flush()
            opened = json.loads(fh.readline())
            assert opened["type"] == "open"
            sid = opened["session_id"]
            fh.write(
                (
                    json.dumps(
                        {
                            "type": "turn",
                            "session_id": sid,
                            "payload": {"speaker": REP, "text": "hello there", "response_latency_ms": 10},
                        }
                    )
                    + "\n"
                ).encode()
            )
            fh.flush()
            est = json.loads(fh.readline())
            guid = json.loads(fh.readline())
            assert est["type"] == "estimate"
            assert guid["type"] == "guidance"
    finally:
        server.shutdown()
        server.server_close()


def test_http_one_shot_round_trip(service):
    server = HttpServer(("127.0.0.1", 0), service)
    port = server.server_address[1]
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        body = json.dumps({"type": "open", "payload": {"industry": "saas"}}).encode()
        req = urllib.request.Request(
            f"http://127.0.0.1:{port}/", data=body, headers={"Content-Type": "application/json"}
        )
        with urllib.request.urlopen(req, timeout=5) as resp:
            assert resp.headers["Access-Control-Allow-Origin"] == "*"
            lines = resp.read().decode().strip().splitlines()
        opened = json.loads(lines[0])
        assert opened["type"] == "open"

        body = json.dumps(
            {
                "type": "turn",
                "session_id": opened["session_id"],
                "payload": {"speaker": REP, "text": "quick hello", "response_latency_ms": 5},
            }
        ).encode()
        req = urllib.request.Request(
            f"http://127.0.0.1:{port}/", data=body, headers={"Content-Type": "application/json"}
        )
        with urllib.request.urlopen(req, timeout=5) as resp:
            lines = resp.read().decode().strip().splitlines()
        assert [json.loads(l)["type"] for l in lines] == ["estimate", "guidance"]
    finally:
        server.shutdown()
        server.server_close()


# --- bench ------------------------------------------------------------------------------

def test_bench_percentile_ordering_and_determinism(service):
    report_a = service.bench(60, concurrency=1, seed=5)
    assert report_a["p50_ms"] <= report_a["p95_ms"] <= report_a["p99_ms"]
    assert report_a["turns"] >= 60
    report_b = service.bench(60, concurrency=1, seed=5)
    assert report_a["output_digest"] == report_b["output_digest"]


def test_bench_concurrent_mode(service):
    report = service.bench(40, concurrency=4, seed=6)
    assert report["concurrency"] == 4
    assert report["turns"] >= 40
