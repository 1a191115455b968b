"""Streaming session service.

Each pushed turn runs the cache-first embedding, feature extraction,
incremental state update, quantized-ensemble prediction, confidence
estimation, and guidance routing, then returns one estimate and one
guidance message in order. Sessions are independent and concurrently
served; a session's turns are processed under its own lock.

The session log is append-only JSONL with a write-fsync-commit discipline:
a record counts only when its commit marker follows, so a crash can never
leave a half-record visible to readers.

Two transports speak the same message schema: newline-delimited JSON over
TCP, and a one-shot HTTP POST (one request message in, the reply messages
out as ndjson) that browsers can use directly.
"""

from __future__ import annotations

import json
import os
import random
import statistics
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from socketserver import StreamRequestHandler, ThreadingTCPServer

from .convo import CUSTOMER, REP, Conversation, Turn
from .errors import (
    NotFoundError,
    SalesconvError,
    ServiceUnavailableError,
    SessionClosedError,
)
from .features import content_tokens, embed_cached, extract_turn_features
from .meta import ConversionEstimate
from .orchestrator import GuidanceEngine, GuidanceMessage
from .pipeline import Runtime, estimate_for_state
from .state import init_state, update_state
from .synthgen import GeneratorConfig, LatentCustomerState, derive_seed, step_customer

LOG_FORMAT_VERSION = 1


def _estimate_rep_quality(text: str, lexicons) -> float:
    """Scores a typed rep utterance so the simulated customer can react."""
    from .features import tokenize

    tokens = tokenize(text)
    lower = text.lower()
    quality = 0.45
    if any(phrase in lower for phrase, _ in lexicons.techniques):
        quality += 0.25
    weights = [lexicons.sentiment[t] for t in tokens if t in lexicons.sentiment]
    if weights:
        quality += 0.2 * (sum(weights) / len(weights))
    if len(text) < 20:
        quality -= 0.15
    return min(1.0, max(0.0, quality))


class SimulatedCustomer:
    """Latent customer persona driving replies in simulate mode."""

    def __init__(self, seed: int, industry: str, config: GeneratorConfig | None = None):
        from . import templates as tpl

        self.config = config or GeneratorConfig()
        self.rng = random.Random(derive_seed(seed, 0x51A1))
        self.latent = LatentCustomerState(
            propensity=self.rng.betavariate(2.0, 2.0),
            engagement=0.5,
            interest_level=0.3,
        )
        products = tpl.INDUSTRY_PRODUCTS.get(industry)
        self.product = self.rng.choice(products) if products else "workflow suite"

    def reply(self, rep_text: str, now_ms: int, lexicons) -> Turn:
        quality = _estimate_rep_quality(rep_text, lexicons)
        self.latent, turn = step_customer(
            self.latent, quality, self.rng, self.config, product=self.product, now_ms=now_ms
        )
        return turn


@dataclass
class Session:
    session_id: str
    industry: str
    state: object
    opened_at_ms: int
    prev_turn: Turn | None = None
    turns: list[Turn] = field(default_factory=list)
    estimates: list[ConversionEstimate] = field(default_factory=list)
    guidance: list[GuidanceMessage] = field(default_factory=list)
    turn_ms: list[float] = field(default_factory=list)
    closed_at_ms: int | None = None
    outcome: bool | None = None
    simulator: SimulatedCustomer | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def closed(self) -> bool:
        return self.closed_at_ms is not None

    def last_timestamp_ms(self) -> int:
        return self.turns[-1].timestamp_ms if self.turns else 0


class SessionLog:
    """Append-only JSONL with write-then-fsync-then-commit-marker discipline."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, record: dict) -> None:
        record_line = json.dumps(
            {"v": LOG_FORMAT_VERSION, "type": "session", "record": record},
            separators=(",", ":"),
        )
        commit_line = json.dumps(
            {"v": LOG_FORMAT_VERSION, "type": "commit", "session_id": record["session_id"]},
            separators=(",", ":"),
        )
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(record_line + "\n")
                fh.flush()
                os.fsync(fh.fileno())
                fh.write(commit_line + "\n")
                fh.flush()
                os.fsync(fh.fileno())

    def read_records(self) -> list[dict]:
        """Committed records only; a trailing uncommitted record is ignored."""
        if not self.path.exists():
            return []
        records = []
        pending: dict | None = None
        for line in self.path.read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError:
                pending = None
                continue
            if doc.get("v") != LOG_FORMAT_VERSION:
                pending = None
                continue
            if doc.get("type") == "session":
                pending = doc.get("record")
            elif (
                doc.get("type") == "commit"
                and pending is not None
                and doc.get("session_id") == pending.get("session_id")
            ):
                records.append(pending)
                pending = None
        return records


class Service:
    def __init__(
        self,
        runtime: Runtime | None,
        guidance: GuidanceEngine,
        log_path: str | Path | None = None,
        simulate_seed: int = 0,
    ):
        self.runtime = runtime
        self.guidance = guidance
        self.log = SessionLog(log_path) if log_path else None
        self.sessions: dict[str, Session] = {}
        self._sessions_lock = threading.Lock()
        self._counter = 0
        self._simulate_seed = simulate_seed

    # -- session lifecycle --

    def open_session(self, request: dict | None = None) -> str:
        if self.runtime is None:
            raise ServiceUnavailableError("no model loaded")
        request = request or {}
        industry = str(request.get("industry", "saas"))
        with self._sessions_lock:
            self._counter += 1
            session_id = f"s{self._counter:06d}-{derive_seed(self._simulate_seed, self._counter) & 0xFFFF:04x}"
            session = Session(
                session_id=session_id,
                industry=industry,
                state=init_state(self.runtime.state_config),
                opened_at_ms=int(time.time() * 1000),
            )
            if request.get("simulate_customer"):
                seed = int(request.get("seed", derive_seed(self._simulate_seed, self._counter)))
                session.simulator = SimulatedCustomer(seed, industry)
            self.sessions[session_id] = session
        return session_id

    def _get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise NotFoundError(f"unknown session {session_id!r}")
        return session

    def push_turn(self, session_id: str, turn: Turn) -> tuple[ConversionEstimate, GuidanceMessage]:
        session = self._get(session_id)
        with session.lock:
            if session.closed:
                raise SessionClosedError(f"session {session_id} is closed")
            started = time.perf_counter()
            runtime = self.runtime
            emb = embed_cached(turn.text, runtime.dim, runtime.cache)
            feats = extract_turn_features(turn, session.prev_turn, runtime.lexicons)
            session.state = update_state(session.state, emb.values, feats, runtime.state_config)
            estimate = estimate_for_state(runtime, session.state, content_tokens(turn.text))
            message = self.guidance.run(estimate, session.state).message
            session.turns.append(turn)
            session.estimates.append(estimate)
            session.guidance.append(message)
            session.prev_turn = turn
            session.turn_ms.append((time.perf_counter() - started) * 1000.0)
            return estimate, message

    def simulated_reply(self, session_id: str, rep_text: str) -> Turn | None:
        session = self._get(session_id)
        if session.simulator is None:
            return None
        return session.simulator.reply(
            rep_text, session.last_timestamp_ms(), self.runtime.lexicons
        )

    def close_session(self, session_id: str, outcome: bool | None = None) -> dict:
        session = self._get(session_id)
        with session.lock:
            if session.closed:
                raise SessionClosedError(f"session {session_id} already closed")
            session.closed_at_ms = int(time.time() * 1000)
            session.outcome = outcome
            probs = [e.probability for e in session.estimates]
            record = {
                "format_version": LOG_FORMAT_VERSION,
                "session_id": session_id,
                "industry": session.industry,
                "opened_at_ms": session.opened_at_ms,
                "closed_at_ms": session.closed_at_ms,
                "outcome": outcome,
                "turns": [t.to_dict() for t in session.turns],
                "estimates": [e.to_dict() for e in session.estimates],
                "guidance": [g.to_dict() for g in session.guidance],
                "summary": {
                    "turns": len(session.turns),
                    "probability_min": min(probs) if probs else None,
                    "probability_max": max(probs) if probs else None,
                    "probability_final": probs[-1] if probs else None,
                },
            }
        if self.log is not None:
            self.log.append(record)
        return record

    # -- benchmark --

    def bench(self, n_turns: int, concurrency: int = 1, seed: int = 99) -> dict:
        """Latency/throughput over synthetic traffic; returns percentile report."""
        conversations = _bench_traffic(n_turns, seed)
        latencies: list[float] = []
        outputs: list[float] = []
        lock = threading.Lock()

        def run_client(convs: list[Conversation]) -> None:
            for conv in convs:
                sid = self.open_session({"industry": conv.industry})
                for turn in conv.turns:
                    t0 = time.perf_counter()
                    estimate, _ = self.push_turn(sid, turn)
                    dt = (time.perf_counter() - t0) * 1000.0
                    with lock:
                        latencies.append(dt)
                        outputs.append(estimate.probability)
                self.close_session(sid, conv.outcome)

        started = time.perf_counter()
        if concurrency <= 1:
            run_client(conversations)
        else:
            shards = [conversations[i::concurrency] for i in range(concurrency)]
            threads = [threading.Thread(target=run_client, args=(s,)) for s in shards]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
        elapsed = time.perf_counter() - started

        latencies.sort()

        def pct(q: float) -> float:
            if not latencies:
                return 0.0
            idx = min(len(latencies) - 1, int(q * len(latencies)))
            return latencies[idx]

        return {
            "turns": len(latencies),
            "concurrency": concurrency,
            "p50_ms": pct(0.50),
            "p95_ms": pct(0.95),
            "p99_ms": pct(0.99),
            "mean_ms": statistics.fmean(latencies) if latencies else 0.0,
            "throughput_turns_per_s": len(latencies) / elapsed if elapsed > 0 else 0.0,
            "output_digest": _digest(outputs),
            "hardware": hardware_summary(),
        }


def _digest(values: list[float]) -> str:
    import hashlib

    h = hashlib.sha256()
    for v in values:
        h.update(f"{v:.12g}".encode("ascii"))
    return h.hexdigest()[:16]


def _bench_traffic(n_turns: int, seed: int) -> list[Conversation]:
    from .synthgen import generate_conversation

    config = GeneratorConfig()
    conversations = []
    total = 0
    i = 0
    while total < n_turns:
        conv = generate_conversation(config, derive_seed(seed, i))
        conversations.append(conv)
        total += len(conv.turns)
        i += 1
    return conversations


def hardware_summary() -> dict:
    model = "unknown"
    try:
        for line in Path("/proc/cpuinfo").read_text().splitlines():
            if line.lower().startswith("model name"):
                model = line.split(":", 1)[1].strip()
                break
    except OSError:
        pass
    return {"cpu_model": model, "cpu_count": os.cpu_count()}


# --- wire protocol -----------------------------------------------------------

def handle_message(service: Service, message: dict) -> list[dict]:
    """One request message in, ordered reply messages out (shared by both
    transports)."""
    msg_type = message.get("type")
    session_id = message.get("session_id")
    payload = message.get("payload") or {}
    try:
        if msg_type == "open":
            sid = service.open_session(payload)
            return [{"type": "open", "session_id": sid, "payload": {"industry": payload.get("industry", "saas")}}]

        if msg_type == "turn":
            session = service._get(session_id)
            latency = int(payload.get("response_latency_ms", 0))
            speaker = payload.get("speaker", REP)
            with session.lock:
                base_ts = session.last_timestamp_ms()
                turn = Turn(
                    speaker=speaker,
                    text=str(payload.get("text", "")),
                    timestamp_ms=base_ts + max(1, latency) if session.turns else max(0, latency),
                    response_latency_ms=max(0, latency),
                )
            estimate, guidance = service.push_turn(session_id, turn)
            replies = [
                _estimate_message(session_id, estimate),
                _guidance_message(session_id, guidance),
            ]
            if speaker == REP and session.simulator is not None:
                customer_turn = service.simulated_reply(session_id, turn.text)
                if customer_turn is not None:
                    est2, guid2 = service.push_turn(session_id, customer_turn)
                    replies.append(
                        {
                            "type": "turn",
                            "session_id": session_id,
                            "payload": {
                                "speaker": customer_turn.speaker,
                                "text": customer_turn.text,
                                "response_latency_ms": customer_turn.response_latency_ms,
                            },
                        }
                    )
                    replies.append(_estimate_message(session_id, est2))
                    replies.append(_guidance_message(session_id, guid2))
            return replies

        if msg_type == "close":
            record = service.close_session(session_id, payload.get("outcome"))
            return [
                {
                    "type": "close",
                    "session_id": session_id,
                    "payload": {"outcome": record["outcome"], "summary": record["summary"]},
                }
            ]

        raise SalesconvError(f"unknown message type {msg_type!r}")
    except SalesconvError as exc:
        return [
            {
                "type": "error",
                "session_id": session_id,
                "payload": {"code": exc.code, "message": str(exc)},
            }
        ]


def _estimate_message(session_id: str, estimate: ConversionEstimate) -> dict:
    return {"type": "estimate", "session_id": session_id, "payload": estimate.to_dict()}


def _guidance_message(session_id: str, guidance: GuidanceMessage) -> dict:
    return {"type": "guidance", "session_id": session_id, "payload": guidance.to_dict()}


class _NdjsonHandler(StreamRequestHandler):
    def handle(self):
        while True:
            line = self.rfile.readline()
            if not line:
                break
            line = line.strip()
            if not line:
                continue
            try:
                message = json.loads(line.decode("utf-8"))
            except json.JSONDecodeError:
                replies = [
                    {"type": "error", "session_id": None, "payload": {"code": "bad_json", "message": "unparseable line"}}
                ]
            else:
                replies = handle_message(self.server.service, message)
            for reply in replies:
                self.wfile.write((json.dumps(reply, separators=(",", ":")) + "\n").encode("utf-8"))
            self.wfile.flush()


class NdjsonServer(ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], service: Service):
        super().__init__(address, _NdjsonHandler)
        self.service = service


class _HttpHandler(BaseHTTPRequestHandler):
    def log_message(self, *args):  # quiet
        pass

    def _send(self, code: int, body: bytes):
        self.send_response(code)
        self.send_header("Content-Type", "application/x-ndjson")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Access-Control-Allow-Methods", "POST, OPTIONS")
        self.end_headers()
        self.wfile.write(body)

    def do_OPTIONS(self):
        self._send(204, b"")

    def do_POST(self):
        length = int(self.headers.get("Content-Length", "0"))
        raw = self.rfile.read(length)
        try:
            message = json.loads(raw.decode("utf-8"))
        except json.JSONDecodeError:
            replies = [
                {"type": "error", "session_id": None, "payload": {"code": "bad_json", "message": "unparseable body"}}
            ]
        else:
            replies = handle_message(self.server.service, message)
        body = "".join(json.dumps(r, separators=(",", ":")) + "\n" for r in replies)
        self._send(200, body.encode("utf-8"))


class HttpServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address: tuple[str, int], service: Service):
        super().__init__(address, _HttpHandler)
        self.service = service
