"""Conversation domain types and the JSONL dataset format.

A dataset is one conversation per line with field names
``id, industry, turns[{speaker,text,timestamp_ms,response_latency_ms}],
outcome, propensity_trace, adversarial``. Stats are emitted as a JSON
sidecar next to the dataset file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import DataError

CUSTOMER = "customer"
REP = "rep"
SPEAKERS = (CUSTOMER, REP)


@dataclass
class Turn:
    speaker: str
    text: str
    timestamp_ms: int
    response_latency_ms: int

    def to_dict(self) -> dict:
        return {
            "speaker": self.speaker,
            "text": self.text,
            "timestamp_ms": self.timestamp_ms,
            "response_latency_ms": self.response_latency_ms,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Turn":
        return cls(
            speaker=d["speaker"],
            text=d["text"],
            timestamp_ms=int(d["timestamp_ms"]),
            response_latency_ms=int(d["response_latency_ms"]),
        )


@dataclass
class Conversation:
    id: str
    industry: str
    turns: list[Turn] = field(default_factory=list)
    outcome: bool | None = None
    propensity_trace: list[float] | None = None
    adversarial: bool = False

    def validate(self) -> None:
        if not self.turns:
            raise DataError(f"conversation {self.id} has no turns")
        last = -1
        for t in self.turns:
            if t.speaker not in SPEAKERS:
                raise DataError(f"bad speaker {t.speaker!r} in {self.id}")
            if not t.text:
                raise DataError(f"empty turn text in {self.id}")
            if t.timestamp_ms <= last:
                raise DataError(f"timestamps not strictly increasing in {self.id}")
            if t.response_latency_ms < 0:
                raise DataError(f"negative latency in {self.id}")
            last = t.timestamp_ms
        if self.propensity_trace is not None and len(self.propensity_trace) != len(self.turns):
            raise DataError(f"trace length mismatch in {self.id}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "industry": self.industry,
            "turns": [t.to_dict() for t in self.turns],
            "outcome": self.outcome,
            "propensity_trace": self.propensity_trace,
            "adversarial": self.adversarial,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Conversation":
        return cls(
            id=d["id"],
            industry=d["industry"],
            turns=[Turn.from_dict(t) for t in d["turns"]],
            outcome=d.get("outcome"),
            propensity_trace=d.get("propensity_trace"),
            adversarial=bool(d.get("adversarial", False)),
        )


def to_jsonl_line(conv: Conversation) -> str:
    return json.dumps(conv.to_dict(), separators=(",", ":"))


def write_jsonl(path: str | Path, conversations: Iterable[Conversation]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for conv in conversations:
            fh.write(to_jsonl_line(conv))
            fh.write("\n")
            n += 1
    return n


def read_jsonl(path: str | Path) -> Iterator[Conversation]:
    p = Path(path)
    if not p.exists():
        raise DataError(f"dataset not found: {p}")
    with open(p, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield Conversation.from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError) as exc:
                raise DataError(f"{p}:{lineno}: bad record ({exc})") from exc


def load_dataset(path: str | Path) -> list[Conversation]:
    return list(read_jsonl(path))
