"""Produce the console's golden wire-protocol transcript fixture.

Trains the small deterministic fixture ensemble, replays a scripted rep
conversation through the serving layer in simulate mode, and records every
request with its ordered replies plus the timeline the console must render.

Usage: python scripts/make_console_fixture.py
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

from salesconv.features import EmbeddingCache
from salesconv.model import TrainingConfig, quantize, train_member
from salesconv.orchestrator import GuidanceEngine, band_of, build_graph, default_graph_spec, load_snippets
from salesconv.pipeline import Runtime, dataset_vocabulary, encode_dataset, index_from_encoded
from salesconv.serve import Service, handle_message
from salesconv.synthgen import GeneratorConfig, derive_seed, generate_adversarial, generate_dataset

OUT = Path(__file__).parent.parent / "frontend" / "tests" / "fixtures" / "golden_transcript.json"

REP_SCRIPT = [
    "Hi, thanks for joining, I wanted to walk through the workflow suite today.",
    "What happens if the current process stays as it is next year?",
    "Teams your size usually see clear cost savings within a quarter.",
]


def build_runtime() -> Runtime:
    gen_config = GeneratorConfig()
    conversations, _ = generate_dataset(600, gen_config, seed=501)
    adversarial = [generate_adversarial(gen_config, derive_seed(0xFACE, i)) for i in range(60)]
    encoded = encode_dataset(conversations)
    encoded_adv = encode_dataset(adversarial)
    config = TrainingConfig(ensemble_k=2, epochs_supervised=10, epochs_rl=1, seed=17)
    models = []
    for i in range(config.ensemble_k):
        model, _ = train_member(encoded + encoded_adv, dataclasses.replace(config, seed=config.seed + i))
        models.append(model)
    index = index_from_encoded(encoded, dataset_vocabulary(conversations), 256, max_entries=4000)
    return Runtime(
        models=models,
        quantized=[quantize(m) for m in models],
        index=index,
        use_quantized=True,
        cache=EmbeddingCache(capacity=4096),
    )


def main() -> None:
    runtime = build_runtime()
    engine = GuidanceEngine(build_graph(default_graph_spec()), load_snippets())
    service = Service(runtime, engine, simulate_seed=3)

    steps = []
    open_msg = {"type": "open", "session_id": None, "payload": {"industry": "saas", "simulate_customer": True, "seed": 9}}
    replies = handle_message(service, open_msg)
    steps.append({"send": open_msg, "replies": replies})
    session_id = replies[0]["session_id"]

    transcript = []
    timeline = []

    def track(send_payload, reply_list):
        nonlocal transcript, timeline
        transcript.append({"speaker": send_payload["speaker"], "text": send_payload["text"]})
        for reply in reply_list:
            if reply["type"] == "turn":
                transcript.append(
                    {"speaker": reply["payload"]["speaker"], "text": reply["payload"]["text"]}
                )
            elif reply["type"] == "estimate":
                payload = reply["payload"]
                timeline.append(
                    {
                        "turnIndex": len(transcript) - 1,
                        "probability": payload["probability"],
                        "confidence": payload["confidence"],
                        "band": band_of(payload["probability"]),
                    }
                )

    for i, text in enumerate(REP_SCRIPT):
        payload = {"speaker": "rep", "text": text, "response_latency_ms": 1500 if i else 0}
        msg = {"type": "turn", "session_id": session_id, "payload": payload}
        replies = handle_message(service, msg)
        assert all(r["type"] != "error" for r in replies), replies
        steps.append({"send": msg, "replies": replies})
        track(payload, replies)

    close_msg = {"type": "close", "session_id": session_id, "payload": {"outcome": None}}
    steps.append({"send": close_msg, "replies": handle_message(service, close_msg)})

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(
        json.dumps(
            {
                "session_id": session_id,
                "steps": steps,
                "expected_transcript": transcript,
                "expected_timeline": timeline,
            },
            indent=2,
            sort_keys=True,
        )
    )
    print(f"wrote {OUT} ({len(steps)} steps, {len(timeline)} timeline points)")


if __name__ == "__main__":
    main()
