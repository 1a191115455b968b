"""Operator entry points.

Subcommands: synth, train, eval, ablate, bench, serve, simulate. Every
command is deterministic given explicit seeds (wall-clock latency fields
aside). Exit codes: 0 success, 2 usage, 3 data/file, 4 service.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import metrics as metrics_mod
from . import pipeline
from .convo import REP, Turn, load_dataset, write_jsonl
from .errors import (
    ConfigurationError,
    DataError,
    FormatVersionError,
    SalesconvError,
    ServiceUnavailableError,
)
from .model import TrainingConfig
from .orchestrator import GuidanceEngine, build_graph, default_graph_spec, load_snippets
from .serve import HttpServer, NdjsonServer, Service, hardware_summary
from .synthgen import (
    GeneratorConfig,
    derive_seed,
    generate_adversarial,
    generate_dataset,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_SERVICE = 4

MODEL_DIR_ENV = "SALESCONV_MODEL_DIR"


def _load_json_config(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise DataError(f"config file not found: {p}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"bad config JSON: {exc}") from exc


def _generator_config(doc: dict) -> GeneratorConfig:
    try:
        return GeneratorConfig.from_dict(doc) if doc else GeneratorConfig()
    except TypeError as exc:
        raise ConfigurationError(f"bad generator config: {exc}") from exc


def _training_config(doc: dict, seed: int | None) -> TrainingConfig:
    doc = {k: v for k, v in doc.items() if k not in ("dim", "index_max")}
    try:
        config = TrainingConfig.from_dict(doc) if doc else TrainingConfig()
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"bad training config: {exc}") from exc
    if seed is not None:
        config = dataclasses.replace(config, seed=seed)
    return config


def _model_dir(args) -> str:
    import os

    model_dir = getattr(args, "model_dir", None) or os.environ.get(MODEL_DIR_ENV)
    if not model_dir:
        raise ConfigurationError(f"--model-dir or ${MODEL_DIR_ENV} required")
    return model_dir


def _emit(args, doc: dict, text_lines: list[str]) -> None:
    if getattr(args, "json", False):
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        for line in text_lines:
            print(line)


# --- synth -------------------------------------------------------------------

def cmd_synth(args) -> int:
    if args.n < 1:
        raise ConfigurationError("-n must be >= 1")
    config = _generator_config(_load_json_config(args.config))
    seed = args.seed if args.seed is not None else config.seed
    t0 = time.time()
    conversations, stats = generate_dataset(
        args.n, config, seed, adversarial_share=args.adversarial_share
    )
    out = Path(args.out)
    write_jsonl(out, conversations)
    stats_path = out.with_suffix(out.suffix + ".stats.json")
    stats_path.write_text(json.dumps(stats.to_dict(), indent=2, sort_keys=True), encoding="utf-8")
    print(
        f"wrote {stats.n} conversations to {out} in {time.time() - t0:.1f}s "
        f"(median turns {stats.length_median}, negative share {stats.negative_share:.3f}); "
        f"stats sidecar {stats_path}"
    )
    return EXIT_OK


# --- train --------------------------------------------------------------------

def cmd_train(args) -> int:
    doc = _load_json_config(args.config)
    train_config = _training_config(doc, args.seed)
    dim = int(doc.get("dim", pipeline.DEFAULT_DIM))
    index_max = int(doc.get("index_max", pipeline.DEFAULT_INDEX_MAX))

    conversations = load_dataset(args.dataset)
    if not conversations:
        raise DataError(f"dataset {args.dataset} is empty")
    normal = [c for c in conversations if not c.adversarial]
    adversarial = [c for c in conversations if c.adversarial]
    if not adversarial:
        gen_config = GeneratorConfig()
        n_adv = max(1, int(round(train_config.adversarial_mix * len(normal))))
        adversarial = [
            generate_adversarial(gen_config, derive_seed(train_config.seed ^ 0xADFE11, i))
            for i in range(n_adv)
        ]

    t0 = time.time()
    artifacts = pipeline.train_artifacts(
        normal,
        adversarial,
        train_config,
        dim=dim,
        index_max=index_max,
    )
    pipeline.save_artifacts(artifacts, args.out)
    phases = [p["phase"] for p in artifacts.reports[0].phases]
    print(
        f"trained {len(artifacts.models)} members in {time.time() - t0:.1f}s; "
        f"phase order: {' -> '.join(phases)}; artifacts in {args.out}"
    )
    return EXIT_OK


# --- eval ---------------------------------------------------------------------

def _oracle_evaluation(conversations) -> pipeline.DatasetEvaluation:
    per_turn = [np.array(c.propensity_trace) for c in conversations]
    return pipeline.DatasetEvaluation(
        final_probs=np.array([p[-1] for p in per_turn]),
        outcomes=np.array([float(c.outcome) for c in conversations]),
        per_turn_probs=per_turn,
        traces=[np.array(c.propensity_trace) for c in conversations],
    )


def _constant_evaluation(conversations) -> pipeline.DatasetEvaluation:
    per_turn = [np.full(len(c.turns), 0.5) for c in conversations]
    return pipeline.DatasetEvaluation(
        final_probs=np.array([0.5] * len(conversations)),
        outcomes=np.array([float(c.outcome) for c in conversations]),
        per_turn_probs=per_turn,
        traces=[np.array(c.propensity_trace) if c.propensity_trace else None for c in conversations],
    )


def cmd_eval(args) -> int:
    conversations = load_dataset(args.dataset)
    if any(c.outcome is None for c in conversations):
        raise DataError("evaluation dataset must contain closed conversations")

    if args.predictor == "oracle":
        if any(c.propensity_trace is None for c in conversations):
            raise DataError("oracle predictor needs propensity traces")
        evaluation = _oracle_evaluation(conversations)
        label = "oracle"
    elif args.predictor == "constant":
        evaluation = _constant_evaluation(conversations)
        label = "constant-0.5"
    else:
        runtime = pipeline.load_runtime(_model_dir(args), use_quantized=False)
        encoded = pipeline.encode_dataset(conversations, runtime.dim, runtime.state_config)
        evaluation = pipeline.evaluate_encoded(runtime.models, encoded, dim=runtime.dim)
        label = "model"

    m = evaluation.metric_dict()
    doc = {"predictor": label, **m}
    lines = [
        f"predictor: {label}",
        f"final-turn accuracy: {m['final_accuracy']:.4f}",
        f"final-turn AUC:      {m['final_auc']:.4f}",
        f"final-turn ECE(10):  {m['final_ece']:.4f}",
    ]
    if "tracking_mae" in m:
        lines.append(f"per-turn MAE vs propensity: {m['tracking_mae']:.4f}")
        curve = ", ".join(f"{v:.3f}" for v in m["mae_by_turn_index"][:10])
        lines.append(f"MAE by turn index (first 10): {curve}")
    curve = ", ".join(f"{v:.3f}" for v in m["accuracy_by_turn_index"][:10])
    lines.append(f"accuracy by turn index (first 10): {curve}")
    _emit(args, doc, lines)
    return EXIT_OK


# --- ablate ---------------------------------------------------------------------

ABLATE_ROWS = ("full", "no_meta", "history_zeroed", "features_only", "no_cache")


def cmd_ablate(args) -> int:
    conversations = load_dataset(args.dataset)
    runtime = pipeline.load_runtime(_model_dir(args), use_quantized=False)
    encoded = pipeline.encode_dataset(conversations, runtime.dim, runtime.state_config)

    rows: dict[str, dict] = {}
    rows["full"] = pipeline.evaluate_encoded(runtime.models, encoded, dim=runtime.dim).metric_dict()
    rows["no_meta"] = pipeline.evaluate_encoded(
        [runtime.models[0]], encoded, dim=runtime.dim
    ).metric_dict()
    rows["history_zeroed"] = pipeline.evaluate_encoded(
        runtime.models, encoded, dim=runtime.dim, zero_history=True
    ).metric_dict()

    train_path = args.train_dataset or args.dataset
    train_convs = [c for c in load_dataset(train_path) if not c.adversarial]
    train_encoded = pipeline.encode_dataset(train_convs, runtime.dim, runtime.state_config)
    features_model = pipeline.train_features_only(train_encoded, runtime.dim, seed=args.seed or 0)
    rows["features_only"] = pipeline.evaluate_encoded(
        [features_model], encoded, dim=runtime.dim, features_only=True
    ).metric_dict()

    rows["no_cache"] = {"timing": pipeline.cache_timing(runtime, conversations[: args.timing_sample])}

    doc = {"rows": rows, "row_order": list(ABLATE_ROWS)}
    lines = [f"{'variant':16s} {'accuracy':>9s} {'auc':>7s} {'ece':>7s} {'mae':>7s}"]
    for name in ABLATE_ROWS:
        m = rows[name]
        if "final_accuracy" in m:
            lines.append(
                f"{name:16s} {m['final_accuracy']:9.4f} {m['final_auc']:7.4f} "
                f"{m['final_ece']:7.4f} {m.get('tracking_mae', float('nan')):7.4f}"
            )
        else:
            t = m["timing"]
            lines.append(
                f"{name:16s} cached {t['cached_ms_per_turn']:.2f} ms/turn, "
                f"uncached {t['uncached_ms_per_turn']:.2f} ms/turn"
            )
    _emit(args, doc, lines)
    return EXIT_OK


# --- bench / serve / simulate ----------------------------------------------------

def _build_service(args, log_path=None, simulate_seed: int = 0) -> Service:
    runtime = pipeline.load_runtime(_model_dir(args), use_quantized=True)
    engine = GuidanceEngine(build_graph(default_graph_spec()), load_snippets(dim=runtime.dim))
    return Service(runtime, engine, log_path=log_path, simulate_seed=simulate_seed)


def cmd_bench(args) -> int:
    service = _build_service(args)
    report = service.bench(args.n, concurrency=args.concurrency, seed=args.seed or 99)
    lines = [
        f"turns: {report['turns']}  concurrency: {report['concurrency']}",
        f"p50 {report['p50_ms']:.2f} ms | p95 {report['p95_ms']:.2f} ms | p99 {report['p99_ms']:.2f} ms",
        f"throughput: {report['throughput_turns_per_s']:.1f} turns/s",
        f"hardware: {report['hardware']['cpu_model']} x{report['hardware']['cpu_count']}",
        f"output digest: {report['output_digest']}",
    ]
    _emit(args, report, lines)
    return EXIT_OK


def cmd_serve(args) -> int:
    service = _build_service(args, log_path=args.log, simulate_seed=args.seed or 0)
    try:
        ndjson_server = NdjsonServer(("127.0.0.1", args.port), service)
    except OSError as exc:
        raise ServiceUnavailableError(f"cannot bind port {args.port}: {exc}") from exc
    http_port = args.http_port if args.http_port is not None else args.port + 1
    try:
        http_server = HttpServer(("127.0.0.1", http_port), service)
    except OSError as exc:
        ndjson_server.server_close()
        raise ServiceUnavailableError(f"cannot bind http port {http_port}: {exc}") from exc

    import threading

    t = threading.Thread(target=http_server.serve_forever, daemon=True)
    t.start()
    print(f"serving ndjson on 127.0.0.1:{args.port}, http on 127.0.0.1:{http_port}")
    try:
        ndjson_server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        ndjson_server.server_close()
        http_server.shutdown()
    return EXIT_OK


def cmd_simulate(args) -> int:
    service = _build_service(args, simulate_seed=args.seed or 0)
    session_id = service.open_session(
        {"industry": args.industry, "simulate_customer": True, "seed": args.seed or 0}
    )
    print(f"simulation started (industry: {args.industry}); type rep messages, 'quit' to end")
    last_ts = 0
    for line in sys.stdin:
        text = line.strip()
        if not text:
            continue
        if text.lower() in ("quit", "exit"):
            break
        last_ts += 1500
        turn = Turn(speaker=REP, text=text, timestamp_ms=last_ts, response_latency_ms=1500)
        estimate, guidance = service.push_turn(session_id, turn)
        print(f"[rep] p={estimate.probability:.3f} conf={estimate.confidence:.3f} | {guidance.text}")
        reply = service.simulated_reply(session_id, text)
        if reply is not None:
            last_ts = reply.timestamp_ms
            estimate, guidance = service.push_turn(session_id, reply)
            print(f"customer: {reply.text}")
            print(f"[cust] p={estimate.probability:.3f} conf={estimate.confidence:.3f} | {guidance.text}")
    record = service.close_session(session_id, None)
    s = record["summary"]
    if s["turns"]:
        print(
            f"session closed after {s['turns']} turns; probability min {s['probability_min']:.3f} "
            f"max {s['probability_max']:.3f} final {s['probability_final']:.3f}"
        )
    else:
        print("session closed with no turns")
    return EXIT_OK


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="salesconv", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic conversation dataset")
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="dataset.jsonl")
    p.add_argument("--adversarial-share", type=float, default=0.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train model, ensemble, and index artifacts")
    p.add_argument("--dataset", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="model_dir")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model directory on a dataset")
    p.add_argument("--model-dir", default=None)
    p.add_argument("--dataset", required=True)
    p.add_argument("--predictor", choices=("model", "oracle", "constant"), default="model")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run the ablation table")
    p.add_argument("--model-dir", default=None)
    p.add_argument("--dataset", required=True)
    p.add_argument("--train-dataset", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--timing-sample", type=int, default=100)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("bench", help="latency/throughput benchmark")
    p.add_argument("--model-dir", default=None)
    p.add_argument("-n", type=int, default=2000)
    p.add_argument("--concurrency", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="run the streaming session service")
    p.add_argument("--model-dir", default=None)
    p.add_argument("--port", type=int, default=7355)
    p.add_argument("--http-port", type=int, default=None)
    p.add_argument("--log", default="sessions.jsonl")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("simulate", help="interactive terminal simulation")
    p.add_argument("--model-dir", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--industry", default="saas")
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error ({exc.code}): {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FormatVersionError) as exc:
        print(f"error ({exc.code}): {exc}", file=sys.stderr)
        return EXIT_DATA
    except ServiceUnavailableError as exc:
        print(f"error ({exc.code}): {exc}", file=sys.stderr)
        return EXIT_SERVICE
    except SalesconvError as exc:
        print(f"error ({exc.code}): {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
