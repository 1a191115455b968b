"""Text featurization: hashed embeddings, turn features, and the LRU cache.

The default embedding provider is a signed feature hash over lowercase
unigrams and bigrams (FNV-1a 64-bit), L2-normalized. It is deterministic,
dependency-free, and linear in the token multiset before normalization.
An external provider can be plugged in behind the same interface; its
credentials come from the environment and failures are never swallowed.
"""

from __future__ import annotations

import os
import re
import threading
from collections import OrderedDict
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Protocol

import numpy as np

from .convo import CUSTOMER, Turn
from .errors import ConfigurationError, DimensionError, ProviderUnavailableError

DEFAULT_DIM = 256
FEATURE_WIDTH = 12

FAST_MS = 2000
SLOW_MS = 10000

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

_TOKEN_RE = re.compile(r"[a-z0-9']+")

STOPWORDS = frozenset(
    """a an and are as at be been by can could did do does for from had has have he her him his how i if in
    into is it its let me my no nor not of on or our out she so some than that the their them then there
    these they this those to too up us was we were what when where which who why will with would you your
    am us ran they'd i'm it's we're that's let's""".split()
)


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & _MASK64
    return h


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def content_tokens(text: str) -> set[str]:
    return {t for t in tokenize(text) if t not in STOPWORDS}


def token_grams(tokens: list[str]) -> list[str]:
    grams = list(tokens)
    grams.extend(f"{a} {b}" for a, b in zip(tokens, tokens[1:]))
    return grams


@lru_cache(maxsize=1 << 17)
def _gram_slot(gram: str, dim: int) -> tuple[int, float]:
    h = fnv1a64(gram.encode("utf-8"))
    sign = -1.0 if (h >> 63) & 1 else 1.0
    return h % dim, sign


@dataclass
class EmbeddingVector:
    values: np.ndarray
    provider_id: str

    def __len__(self) -> int:
        return len(self.values)


def hashed_provider_id(dim: int) -> str:
    return f"hash-fnv1a64/{dim}"


def embed_grams_raw(grams: Iterable[str], dim: int) -> np.ndarray:
    """Signed-hash accumulation without normalization (linear in the multiset)."""
    v = np.zeros(dim, dtype=np.float64)
    for g in grams:
        idx, sign = _gram_slot(g, dim)
        v[idx] += sign
    return v


def embed_text_raw(text: str, dim: int = DEFAULT_DIM) -> np.ndarray:
    return embed_grams_raw(token_grams(tokenize(text)), dim)


def embed_text(text: str, dim: int = DEFAULT_DIM) -> EmbeddingVector:
    if dim < 8:
        raise ConfigurationError("embedding dimension must be >= 8")
    v = embed_text_raw(text, dim)
    norm = float(np.linalg.norm(v))
    if norm > 0:
        v = v / norm
    return EmbeddingVector(values=v, provider_id=hashed_provider_id(dim))


# --- lexicons ---------------------------------------------------------------

_DATA_DIR = Path(__file__).parent / "data" / "lexicons"


def _read_lexicon_lines(path: Path) -> list[tuple[str, str | None]]:
    rows = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "\t" in line:
            term, value = line.split("\t", 1)
            rows.append((term.strip().lower(), value.strip()))
        else:
            rows.append((line.lower(), None))
    return rows


@dataclass
class Lexicons:
    sentiment: dict[str, float]
    objections: list[tuple[str, str]]  # (phrase, kind)
    interest: list[str]
    techniques: list[tuple[str, str]]  # (phrase, technique)

    @property
    def objection_kinds(self) -> list[str]:
        seen: list[str] = []
        for _, kind in self.objections:
            if kind not in seen:
                seen.append(kind)
        return seen


@lru_cache(maxsize=4)
def load_lexicons(directory: str | None = None) -> Lexicons:
    d = Path(directory) if directory else _DATA_DIR
    sentiment = {}
    for term, value in _read_lexicon_lines(d / "sentiment.tsv"):
        w = float(value if value is not None else 0.0)
        sentiment[term] = max(-1.0, min(1.0, w))
    objections = [(t, v or "other") for t, v in _read_lexicon_lines(d / "objections.tsv")]
    interest = [t for t, _ in _read_lexicon_lines(d / "interest.tsv")]
    techniques = [(t, v or "other") for t, v in _read_lexicon_lines(d / "techniques.tsv")]
    return Lexicons(sentiment=sentiment, objections=objections, interest=interest, techniques=techniques)


# --- turn features ----------------------------------------------------------

OBJECTION_KIND_ORDER = ["price", "timing", "trust", "competitor"]
BUCKETS = ["fast", "normal", "slow"]


@dataclass
class TurnFeatures:
    question_density: float
    message_length_norm: float
    sentiment: float
    response_time_bucket: str
    objection_flags: frozenset[str]
    interest_flag: bool
    technique_tags: frozenset[str]
    speaker: str

    def to_array(self) -> np.ndarray:
        bucket = [1.0 if self.response_time_bucket == b else 0.0 for b in BUCKETS]
        objections = [1.0 if k in self.objection_flags else 0.0 for k in OBJECTION_KIND_ORDER]
        return np.array(
            [
                self.question_density,
                self.message_length_norm,
                self.sentiment,
                *bucket,
                *objections,
                1.0 if self.interest_flag else 0.0,
                1.0 if self.technique_tags else 0.0,
            ],
            dtype=np.float64,
        )


_SENTENCE_END_RE = re.compile(r"[.!?]+(?=\s|$)")


def _sentence_stats(text: str) -> tuple[int, int]:
    """(sentences, question_sentences); unterminated trailing text counts once."""
    ends = _SENTENCE_END_RE.findall(text)
    n = len(ends)
    last = 0
    for m in _SENTENCE_END_RE.finditer(text):
        last = m.end()
    if text[last:].strip():
        n += 1
    questions = sum(1 for e in ends if "?" in e)
    return max(n, 0), questions


def extract_turn_features(turn: Turn, prev_turn: Turn | None, lexicons: Lexicons) -> TurnFeatures:
    text_lower = turn.text.lower()
    tokens = tokenize(turn.text)

    sentences, questions = _sentence_stats(turn.text)
    question_density = questions / max(1, sentences)

    weights = [lexicons.sentiment[t] for t in tokens if t in lexicons.sentiment]
    sentiment = max(-1.0, min(1.0, sum(weights) / len(weights))) if weights else 0.0

    latency = turn.response_latency_ms
    if latency < FAST_MS:
        bucket = "fast"
    elif latency < SLOW_MS:
        bucket = "normal"
    else:
        bucket = "slow"

    objections = frozenset(kind for phrase, kind in lexicons.objections if phrase in text_lower)
    interest = any(phrase in text_lower for phrase in lexicons.interest)
    techniques = frozenset(tech for phrase, tech in lexicons.techniques if phrase in text_lower)

    return TurnFeatures(
        question_density=question_density,
        message_length_norm=min(1.0, len(turn.text) / 500.0),
        sentiment=sentiment,
        response_time_bucket=bucket,
        objection_flags=objections,
        interest_flag=interest,
        technique_tags=techniques,
        speaker=turn.speaker,
    )


def is_customer(feats: TurnFeatures) -> bool:
    return feats.speaker == CUSTOMER


# --- embedding cache --------------------------------------------------------

def cache_key(provider_id: str, text: str) -> int:
    return fnv1a64(f"{provider_id}\x00{text}".encode("utf-8"))


class EmbeddingCache:
    """LRU cache keyed by 64-bit (provider, text) hashes.

    One mutex guards all operations, which makes every get/put linearizable;
    contention is negligible next to the embedding work it saves.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigurationError("cache capacity must be >= 1")
        self.capacity = capacity
        self._entries: OrderedDict[int, np.ndarray] = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        self.evictions = 0

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: int) -> np.ndarray | None:
        with self._lock:
            if key in self._entries:
                self._entries.move_to_end(key)
                self.hits += 1
                return self._entries[key]
            self.misses += 1
            return None

    def put(self, key: int, value: np.ndarray) -> None:
        with self._lock:
            if key in self._entries:
                self._entries.move_to_end(key)
                self._entries[key] = value
                return
            self._entries[key] = value
            if len(self._entries) > self.capacity:
                self._entries.popitem(last=False)
                self.evictions += 1


def embed_cached(text: str, dim: int, cache: EmbeddingCache | None) -> EmbeddingVector:
    provider = hashed_provider_id(dim)
    if cache is None:
        return embed_text(text, dim)
    key = cache_key(provider, text)
    hit = cache.get(key)
    if hit is not None:
        return EmbeddingVector(values=hit, provider_id=provider)
    vec = embed_text(text, dim)
    cache.put(key, vec.values)
    return vec


# --- external provider ------------------------------------------------------

class ExternalEmbeddingProvider(Protocol):
    provider_id: str

    def embed(self, text: str) -> Iterable[float]: ...


@dataclass
class ProviderSettings:
    endpoint: str
    api_key: str
    model: str

    ENDPOINT_VAR = "SALESCONV_EMBED_ENDPOINT"
    API_KEY_VAR = "SALESCONV_EMBED_API_KEY"
    MODEL_VAR = "SALESCONV_EMBED_MODEL"

    @classmethod
    def from_env(cls) -> "ProviderSettings":
        missing = [v for v in (cls.ENDPOINT_VAR, cls.API_KEY_VAR, cls.MODEL_VAR) if not os.environ.get(v)]
        if missing:
            raise ConfigurationError(f"missing provider environment variables: {', '.join(missing)}")
        return cls(
            endpoint=os.environ[cls.ENDPOINT_VAR],
            api_key=os.environ[cls.API_KEY_VAR],
            model=os.environ[cls.MODEL_VAR],
        )


class HttpEmbeddingProvider:
    """Minimal JSON-over-POST provider client; raises rather than falling back."""

    def __init__(self, settings: ProviderSettings, timeout_s: float = 10.0):
        self.settings = settings
        self.timeout_s = timeout_s
        self.provider_id = f"external/{settings.model}"

    def embed(self, text: str) -> list[float]:
        import json
        import urllib.request

        req = urllib.request.Request(
            self.settings.endpoint,
            data=json.dumps({"model": self.settings.model, "input": text}).encode("utf-8"),
            headers={
                "Content-Type": "application/json",
                "Authorization": f"Bearer {self.settings.api_key}",
            },
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except Exception as exc:
            raise ProviderUnavailableError(f"embedding provider request failed: {exc}") from exc
        if "embedding" not in payload:
            raise ProviderUnavailableError("embedding provider returned no embedding")
        return [float(x) for x in payload["embedding"]]


def embed_external(
    text: str,
    provider: ExternalEmbeddingProvider,
    dim: int,
    cache: EmbeddingCache | None = None,
) -> EmbeddingVector:
    key = cache_key(provider.provider_id, text)
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            return EmbeddingVector(values=hit, provider_id=provider.provider_id)
    try:
        raw = np.asarray(list(provider.embed(text)), dtype=np.float64)
    except ProviderUnavailableError:
        raise
    except Exception as exc:
        raise ProviderUnavailableError(f"embedding provider failed: {exc}") from exc
    if raw.shape != (dim,):
        raise DimensionError(f"provider returned dimension {raw.shape}, expected ({dim},)")
    norm = float(np.linalg.norm(raw))
    if norm > 0:
        raw = raw / norm
    if cache is not None:
        cache.put(key, raw)
    return EmbeddingVector(values=raw, provider_id=provider.provider_id)
