"""Directed-graph guidance pipeline.

A validated DAG of Route/Cache/Retrieve/Template nodes turns a conversion
estimate plus the current state into a strategic guidance message. The
default graph routes by probability band to a per-band retrieve-and-fill
path; cache nodes memoize retrieval keyed by (band, quantized state hash).
Each run records a node-visit trace for observability.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    CycleDetectedError,
    DanglingEdgeError,
    DataError,
    GraphError,
    NoTemplateError,
)
from .features import EmbeddingCache, Lexicons, cache_key, embed_text, load_lexicons
from .meta import ConversionEstimate
from .state import StateVector

LOW_MAX = 0.33
MID_MAX = 0.66
BANDS = ("low", "mid", "high")

NODE_TYPES = ("route", "cache", "retrieve", "template")

_DATA_DIR = Path(__file__).parent / "data"


def band_of(probability: float) -> str:
    """Total, monotone step function; boundaries belong to the upper band."""
    if probability < LOW_MAX:
        return "low"
    if probability < MID_MAX:
        return "mid"
    return "high"


@dataclass
class GraphNode:
    node_id: str
    node_type: str
    params: dict = field(default_factory=dict)


@dataclass
class GuidanceGraph:
    nodes: dict[str, GraphNode]
    edges: list[tuple[str, str]]
    entry: str

    def successors(self, node_id: str) -> list[str]:
        return [b for a, b in self.edges if a == node_id]


@dataclass
class GuidanceMessage:
    text: str
    band: str
    snippet_id: str | None
    rationale_tags: list[str]

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "band": self.band,
            "snippet_id": self.snippet_id,
            "rationale_tags": self.rationale_tags,
        }


@dataclass
class Snippet:
    snippet_id: str
    text: str
    tags: list[str]
    embedding: np.ndarray


class SnippetStore:
    def __init__(self, snippets: list[Snippet]):
        ids = [s.snippet_id for s in snippets]
        if len(set(ids)) != len(ids):
            raise DataError("snippet ids must be unique")
        self.snippets = snippets

    def __len__(self) -> int:
        return len(self.snippets)

    def for_band(self, band: str) -> list[Snippet]:
        return [s for s in self.snippets if band in s.tags]


def load_snippets(path: str | Path | None = None, dim: int = 256) -> SnippetStore:
    """JSONL: one {id, text, tags} per line; embeddings via the hashed provider."""
    p = Path(path) if path else _DATA_DIR / "snippets.jsonl"
    if not p.exists():
        raise DataError(f"snippet store not found: {p}")
    snippets = []
    for line in p.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        d = json.loads(line)
        snippets.append(
            Snippet(
                snippet_id=d["id"],
                text=d["text"],
                tags=list(d["tags"]),
                embedding=embed_text(d["text"], dim).values,
            )
        )
    return SnippetStore(snippets)


# --- graph construction -----------------------------------------------------

def default_graph_spec() -> dict:
    p = _DATA_DIR / "graph_default.json"
    return json.loads(p.read_text(encoding="utf-8"))


def build_graph(spec: dict) -> GuidanceGraph:
    """Validate and build; raises for cycles, dangling edges, or missing
    template coverage (every path from entry must end at exactly one
    template node)."""
    nodes: dict[str, GraphNode] = {}
    for n in spec.get("nodes", []):
        node_type = n.get("type")
        if node_type not in NODE_TYPES:
            raise GraphError(f"unknown node type {node_type!r}")
        node_id = n["id"]
        if node_id in nodes:
            raise GraphError(f"duplicate node id {node_id!r}")
        nodes[node_id] = GraphNode(node_id=node_id, node_type=node_type, params=n.get("params", {}))

    edges: list[tuple[str, str]] = []
    for a, b in spec.get("edges", []):
        if a not in nodes or b not in nodes:
            raise DanglingEdgeError(f"edge ({a!r}, {b!r}) references unknown node")
        edges.append((a, b))

    entry = spec.get("entry")
    if entry not in nodes:
        raise DanglingEdgeError(f"entry node {entry!r} not defined")

    graph = GuidanceGraph(nodes=nodes, edges=edges, entry=entry)
    _check_acyclic(graph)
    _check_template_paths(graph)
    return graph


def _check_acyclic(graph: GuidanceGraph) -> None:
    indegree = {nid: 0 for nid in graph.nodes}
    for _, b in graph.edges:
        indegree[b] += 1
    queue = sorted(nid for nid, d in indegree.items() if d == 0)
    seen = 0
    while queue:
        nid = queue.pop(0)
        seen += 1
        for succ in graph.successors(nid):
            indegree[succ] -= 1
            if indegree[succ] == 0:
                queue.append(succ)
    if seen != len(graph.nodes):
        raise CycleDetectedError("guidance graph contains a cycle")


def _check_template_paths(graph: GuidanceGraph) -> None:
    """Every maximal path from the entry ends at exactly one template node."""
    stack = [(graph.entry, False)]
    visited_states = set()
    while stack:
        nid, seen_template = stack.pop()
        node = graph.nodes[nid]
        is_template = node.node_type == "template"
        if is_template and seen_template:
            raise GraphError(f"path reaches a second template at {nid!r}")
        succs = graph.successors(nid)
        if is_template and succs:
            raise GraphError(f"template node {nid!r} must be terminal")
        if not succs and not is_template:
            raise NoTemplateError(f"path ends at non-template node {nid!r}")
        for succ in succs:
            key = (succ, seen_template or is_template)
            if key not in visited_states:
                visited_states.add(key)
                stack.append((succ, seen_template or is_template))


# --- execution ---------------------------------------------------------------

GENERIC_TEXT = {
    "low": "Conversion risk is high. Re-anchor on the customer's core problem before pitching further.",
    "mid": "The customer is undecided. Address the open concern directly and offer one concrete next step.",
    "high": "Strong buying signals. Summarize agreed value and propose closing logistics.",
}


class GuidanceGenerator:
    """Pluggable text finisher; the default fills a deterministic template."""

    def render(self, snippet_text: str | None, band: str, tags: list[str]) -> str:
        base = snippet_text if snippet_text else GENERIC_TEXT[band]
        if tags:
            return f"{base} Open objections: {', '.join(sorted(tags))}."
        return base


def quantized_state_hash(state: StateVector) -> int:
    q = np.clip(np.round(state.history * 127.0), -127, 127).astype(np.int8)
    return cache_key("guidance-state", q.tobytes().hex())


@dataclass
class GuidanceRun:
    message: GuidanceMessage
    trace: list[tuple[str, str]]  # (node_id, status)


class GuidanceEngine:
    def __init__(
        self,
        graph: GuidanceGraph,
        store: SnippetStore,
        lexicons: Lexicons | None = None,
        cache_capacity: int = 1024,
        generator: GuidanceGenerator | None = None,
    ):
        self.graph = graph
        self.store = store
        self.lexicons = lexicons or load_lexicons()
        self.cache = EmbeddingCache(capacity=cache_capacity)
        self.generator = generator or GuidanceGenerator()
        self._lock = threading.Lock()

    def run(self, estimate: ConversionEstimate, state: StateVector) -> GuidanceRun:
        band = band_of(estimate.probability)
        trace: list[tuple[str, str]] = []
        ctx: dict = {"band": band, "snippet": None, "snippet_cached": False}

        node_id = self.graph.entry
        while True:
            node = self.graph.nodes[node_id]
            next_id = self._execute(node, ctx, state, trace)
            if next_id is None:
                break
            node_id = next_id

        tags = self._objection_tags(state)
        snippet: Snippet | None = ctx["snippet"]
        text = self.generator.render(snippet.text if snippet else None, band, tags)
        message = GuidanceMessage(
            text=text,
            band=band,
            snippet_id=snippet.snippet_id if snippet else None,
            rationale_tags=tags,
        )
        return GuidanceRun(message=message, trace=trace)

    def _objection_tags(self, state: StateVector) -> list[str]:
        from .features import OBJECTION_KIND_ORDER

        # objection flag block sits right after the 3 scalars + 3 buckets
        flags = state.features_last[6:10]
        return [kind for kind, flag in zip(OBJECTION_KIND_ORDER, flags) if flag > 0.5]

    def _execute(
        self, node: GraphNode, ctx: dict, state: StateVector, trace: list[tuple[str, str]]
    ) -> str | None:
        if node.node_type == "route":
            target = node.params.get("bands", {}).get(ctx["band"])
            if target is None:
                raise GraphError(f"route node {node.node_id!r} has no target for band {ctx['band']!r}")
            trace.append((node.node_id, f"route:{ctx['band']}"))
            return target

        if node.node_type == "cache":
            key = cache_key("guidance", f"{ctx['band']}:{quantized_state_hash(state)}")
            ctx["cache_key"] = key
            with self._lock:
                hit = self.cache.get(key)
            if hit is not None:
                sid = hit.tobytes().decode("utf-8")
                ctx["snippet"] = next(
                    (s for s in self.store.snippets if s.snippet_id == sid), None
                )
                ctx["snippet_cached"] = ctx["snippet"] is not None
                trace.append((node.node_id, "hit"))
            else:
                trace.append((node.node_id, "miss"))
            return self._single_successor(node)

        if node.node_type == "retrieve":
            if ctx["snippet_cached"]:
                trace.append((node.node_id, "skipped"))
                return self._single_successor(node)
            candidates = self.store.for_band(ctx["band"])
            if not candidates:
                ctx["snippet"] = None
                trace.append((node.node_id, "no_snippet"))
                return self._single_successor(node)
            best = None
            best_sim = -np.inf
            for s in sorted(candidates, key=lambda s: s.snippet_id):
                sim = float(state.history @ s.embedding)
                if sim > best_sim + 1e-12:
                    best, best_sim = s, sim
            ctx["snippet"] = best
            key = ctx.get("cache_key")
            if key is not None and best is not None:
                with self._lock:
                    self.cache.put(key, np.frombuffer(best.snippet_id.encode("utf-8"), dtype=np.uint8))
            trace.append((node.node_id, f"retrieved:{best.snippet_id if best else 'none'}"))
            return self._single_successor(node)

        # template node: terminal
        trace.append((node.node_id, "template"))
        return None

    def _single_successor(self, node: GraphNode) -> str:
        succs = self.graph.successors(node.node_id)
        if len(succs) != 1:
            raise GraphError(f"node {node.node_id!r} must have exactly one successor")
        return succs[0]


def run_guidance(
    estimate: ConversionEstimate,
    state: StateVector,
    engine: GuidanceEngine,
) -> GuidanceMessage:
    return engine.run(estimate, state).message
