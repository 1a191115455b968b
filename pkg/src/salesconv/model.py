"""Conversion-probability estimator: a small two-head MLP trained in two
phases.

Phase one is supervised: every turn of every closed conversation is an
example, the policy head minimizes binary cross-entropy against the final
outcome, and the value head regresses the discounted cumulative per-turn
reward (reward = 1 - squared error of the probability, a Brier-style
accuracy measure). Phase two refines the policy with advantage-signed,
difficulty-scaled nudges whose per-example probability change is clipped,
over a curriculum of increasing conversation length, with
sentiment-inverted conversations mixed in after the first stage.

Backpropagation is derived by hand; the optimizer is Adam. Training is
deterministic given the seed.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import DataError, DimensionError, FormatVersionError

MODEL_FORMAT_VERSION = 1
HIDDEN_DIMS = (64, 32)

_TENSOR_NAMES = ("w1", "b1", "w2", "b2", "wp", "bp", "wv", "bv")


@dataclass(frozen=True)
class TrainingConfig:
    lr0: float = 1e-3
    clip_eps: float = 0.2
    gamma: float = 0.95
    batch: int = 64
    epochs_supervised: int = 20
    epochs_rl: int = 2
    curriculum_stages: tuple[int, ...] = (6, 12, 27)
    ensemble_k: int = 5
    value_loss_weight: float = 0.25
    rl_optimizer_lr: float = 0.1
    rl_value_lr: float = 0.02  # SGD stability bound for the linear value head
    adversarial_mix: float = 0.10
    seed: int = 0

    def __post_init__(self):
        if self.clip_eps <= 0:
            raise ValueError("clip_eps must be > 0")
        if not (0.0 <= self.gamma <= 1.0):
            raise ValueError("gamma must be in [0,1]")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingConfig":
        kw = dict(d)
        if "curriculum_stages" in kw:
            kw["curriculum_stages"] = tuple(kw["curriculum_stages"])
        return cls(**kw)


@dataclass
class PolicyModel:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    wp: np.ndarray
    bp: np.ndarray  # shape ()
    wv: np.ndarray
    bv: np.ndarray  # shape ()
    version: str = "1"
    seed: int = 0
    return_scale: float = 0.05  # value head trains on return * return_scale

    @property
    def input_dim(self) -> int:
        return self.w1.shape[0]

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in _TENSOR_NAMES}

    def copy(self) -> "PolicyModel":
        return PolicyModel(
            **{name: getattr(self, name).copy() for name in _TENSOR_NAMES},
            version=self.version,
            seed=self.seed,
            return_scale=self.return_scale,
        )


def new_model(input_dim: int, seed: int = 0, hidden: tuple[int, int] = HIDDEN_DIMS) -> PolicyModel:
    rng = np.random.default_rng(seed)
    h1, h2 = hidden

    def init(fan_in: int, shape) -> np.ndarray:
        return rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=shape)

    return PolicyModel(
        w1=init(input_dim, (input_dim, h1)),
        b1=np.zeros(h1),
        w2=init(h1, (h1, h2)),
        b2=np.zeros(h2),
        wp=init(h2, (h2,)),
        bp=np.zeros(()),
        wv=init(h2, (h2,)),
        bv=np.zeros(()),
        seed=seed,
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


def _forward(model: PolicyModel, X: np.ndarray) -> dict[str, np.ndarray]:
    z1 = X @ model.w1 + model.b1
    h1 = np.tanh(z1)
    z2 = h1 @ model.w2 + model.b2
    h2 = np.tanh(z2)
    logit = h2 @ model.wp + model.bp
    v = h2 @ model.wv + model.bv
    return {"X": X, "h1": h1, "h2": h2, "logit": logit, "p": _sigmoid(logit), "v": v}


def _check_width(model: PolicyModel, x: np.ndarray) -> None:
    if x.shape[-1] != model.input_dim:
        raise DimensionError(f"state width {x.shape[-1]} does not match model input {model.input_dim}")


def predict(model: PolicyModel, state: np.ndarray) -> float:
    x = np.asarray(state, dtype=np.float64)
    _check_width(model, x)
    return float(_forward(model, x[None, :])["p"][0])


def predict_batch(model: PolicyModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    _check_width(model, X)
    return _forward(model, X)["p"]


def value(model: PolicyModel, state: np.ndarray) -> float:
    """Expected discounted cumulative reward (head output rescaled)."""
    x = np.asarray(state, dtype=np.float64)
    _check_width(model, x)
    return float(_forward(model, x[None, :])["v"][0]) / model.return_scale


def value_batch(model: PolicyModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    _check_width(model, X)
    return _forward(model, X)["v"] / model.return_scale


def turn_reward(p: float, outcome: bool) -> float:
    """Brier-style accuracy reward in [0,1]."""
    y = 1.0 if outcome else 0.0
    return 1.0 - (p - y) ** 2


def return_scale_for(gamma: float) -> float:
    """Maps discounted returns onto a roughly unit scale for head balance."""
    return (1.0 - gamma) if gamma < 1.0 else 1.0 / 27.0


def discounted_returns(rewards: np.ndarray, gamma: float) -> np.ndarray:
    G = np.zeros_like(rewards)
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        G[t] = acc
    return G


# --- training data ----------------------------------------------------------

@dataclass
class EncodedConversation:
    conversation_id: str
    industry: str
    states: np.ndarray  # (turns, input_dim)
    outcome: bool
    trace: np.ndarray | None = None
    adversarial: bool = False

    def __len__(self) -> int:
        return len(self.states)


def _backprop(
    model: PolicyModel,
    cache: dict,
    dlogit: np.ndarray,
    dv: np.ndarray,
    value_to_trunk: bool = True,
) -> dict[str, np.ndarray]:
    X, h1, h2 = cache["X"], cache["h1"], cache["h2"]
    dh2 = dlogit[:, None] * model.wp[None, :]
    if value_to_trunk:
        dh2 = dh2 + dv[:, None] * model.wv[None, :]
    dz2 = dh2 * (1.0 - h2 * h2)
    dh1 = dz2 @ model.w2.T
    dz1 = dh1 * (1.0 - h1 * h1)
    return {
        "w1": X.T @ dz1,
        "b1": dz1.sum(axis=0),
        "w2": h1.T @ dz2,
        "b2": dz2.sum(axis=0),
        "wp": h2.T @ dlogit,
        "bp": np.asarray(dlogit.sum()),
        "wv": h2.T @ dv,
        "bv": np.asarray(dv.sum()),
    }


def supervised_loss_and_grads(
    model: PolicyModel, X: np.ndarray, y: np.ndarray, G: np.ndarray, value_weight: float = 0.25
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean BCE of the policy head plus weighted value-head MSE.

    ``G`` (the discounted-return targets) is treated as a constant; the
    value term is down-weighted so its larger scale cannot swamp the
    policy gradient in the shared trunk.
    """
    cache = _forward(model, X)
    p, v = cache["p"], cache["v"]
    n = len(X)
    p_safe = np.clip(p, 1e-12, 1.0 - 1e-12)
    bce = -(y * np.log(p_safe) + (1.0 - y) * np.log(1.0 - p_safe))
    loss = float(bce.mean() + value_weight * ((v - G) ** 2).mean())
    dlogit = (p - y) / n
    dv = 2.0 * value_weight * (v - G) / n
    return loss, _backprop(model, cache, dlogit, dv)


def rl_loss_and_grads(
    model: PolicyModel, X: np.ndarray, p_target: np.ndarray, G: np.ndarray, value_weight: float = 0.25
) -> tuple[float, dict[str, np.ndarray]]:
    """Clipped-target policy regression plus value-head regression.

    The value term updates only the value head here: the RL policy targets
    are deliberately tiny nudges, and letting the value regression keep
    reshaping the shared trunk for thousands of steps would drift the
    probability estimator the supervised phase calibrated.
    """
    cache = _forward(model, X)
    p, v = cache["p"], cache["v"]
    n = len(X)
    loss = float(((p - p_target) ** 2).mean() + value_weight * ((v - G) ** 2).mean())
    dlogit = 2.0 * (p - p_target) * p * (1.0 - p) / n
    dv = 2.0 * value_weight * (v - G) / n
    return loss, _backprop(model, cache, dlogit, dv, value_to_trunk=False)


class _Adam:
    def __init__(self, model: PolicyModel, lr: float):
        self.lr = lr
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in model.tensors().items()}
        self.v = {k: np.zeros_like(v) for k, v in model.tensors().items()}

    def step(self, model: PolicyModel, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2, eps = 0.9, 0.999, 1e-8
        for name, g in grads.items():
            self.m[name] = b1 * self.m[name] + (1 - b1) * g
            self.v[name] = b2 * self.v[name] + (1 - b2) * (g * g)
            m_hat = self.m[name] / (1 - b1**self.t)
            v_hat = self.v[name] / (1 - b2**self.t)
            tensor = getattr(model, name)
            tensor -= self.lr * m_hat / (np.sqrt(v_hat) + eps)


def _stratified_order(
    conversations: list[EncodedConversation], rng: np.random.Generator
) -> list[EncodedConversation]:
    """Proportional interleave over (industry, outcome) strata.

    Each stratum is spread evenly across the epoch (stride scheduling), so
    every stretch of batches sees the global label mix; a plain round-robin
    would drain small strata early and end each epoch on one label.
    """
    strata: dict[tuple[str, bool], list[EncodedConversation]] = {}
    for conv in conversations:
        strata.setdefault((conv.industry, conv.outcome), []).append(conv)
    keyed: list[tuple[float, int, int, EncodedConversation]] = []
    for stratum_idx, key in enumerate(sorted(strata)):
        group = strata[key]
        order = rng.permutation(len(group))
        jitter = rng.random()  # decorrelates stratum phases across epochs
        for pos, item_idx in enumerate(order):
            keyed.append(((pos + jitter) / len(group), stratum_idx, pos, group[item_idx]))
    keyed.sort(key=lambda t: (t[0], t[1], t[2]))
    return [item for _, _, _, item in keyed]


def _conversation_batches(
    ordered: list[EncodedConversation], example_budget: int
) -> Iterable[list[EncodedConversation]]:
    batch: list[EncodedConversation] = []
    count = 0
    for conv in ordered:
        batch.append(conv)
        count += len(conv)
        if count >= example_budget:
            yield batch
            batch, count = [], 0
    if batch:
        yield batch


@dataclass
class TrainingReport:
    supervised_losses: list[float] = field(default_factory=list)
    rl_stage_losses: list[list[float]] = field(default_factory=list)
    rl_update_log: np.ndarray | None = None
    phases: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        log = self.rl_update_log
        return {
            "supervised_losses": self.supervised_losses,
            "rl_stage_losses": self.rl_stage_losses,
            "rl_updates": None
            if log is None
            else {"count": int(log.size), "max_abs_dp": float(log.max()) if log.size else 0.0},
            "phases": self.phases,
        }


def train_supervised(
    dataset: list[EncodedConversation], config: TrainingConfig
) -> tuple[PolicyModel, TrainingReport]:
    if not dataset:
        raise DataError("empty training dataset")
    input_dim = dataset[0].states.shape[1]
    model = new_model(input_dim, seed=config.seed)
    model.return_scale = return_scale_for(config.gamma)
    opt = _Adam(model, config.lr0)
    rng = np.random.default_rng(config.seed)
    report = TrainingReport()

    for _epoch in range(config.epochs_supervised):
        ordered = _stratified_order(dataset, rng)
        losses = []
        for batch in _conversation_batches(ordered, config.batch):
            X = np.concatenate([c.states for c in batch]).astype(np.float64)
            y = np.concatenate([np.full(len(c), float(c.outcome)) for c in batch])
            p = predict_batch(model, X)
            G = np.empty_like(p)
            offset = 0
            for c in batch:
                t = len(c)
                rewards = 1.0 - (p[offset : offset + t] - float(c.outcome)) ** 2
                G[offset : offset + t] = discounted_returns(rewards, config.gamma)
                offset += t
            G *= model.return_scale
            loss, grads = supervised_loss_and_grads(model, X, y, G, config.value_loss_weight)
            opt.step(model, grads)
            losses.append(loss)
        report.supervised_losses.append(float(np.mean(losses)))
    report.phases.append({"phase": "supervised", "epochs": config.epochs_supervised})
    return model, report


def train_rl(
    model: PolicyModel, dataset: list[EncodedConversation], config: TrainingConfig
) -> tuple[PolicyModel, TrainingReport]:
    """Advantage-signed clipped refinement over a length curriculum.

    Per example the policy logit is nudged in the direction of the
    advantage's sign with step size lr0*(1+|p-y|); the implied probability
    change is clipped to clip_eps and logged. Sentiment-inverted
    conversations join from the second stage onward.
    """
    if not dataset:
        raise DataError("empty training dataset")
    model = model.copy()
    rng = np.random.default_rng(config.seed + 7919)
    report = TrainingReport()
    update_log: list[np.ndarray] = []

    normal = [c for c in dataset if not c.adversarial]
    adversarial = [c for c in dataset if c.adversarial]

    for stage_idx, max_len in enumerate(config.curriculum_stages):
        stage_convs = [c for c in normal if len(c) <= max_len]
        if stage_idx >= 1 and adversarial:
            want = int(round(config.adversarial_mix * len(stage_convs)))
            pool = [c for c in adversarial if len(c) <= max_len]
            if pool and want:
                idx = rng.permutation(len(pool))[:want]
                stage_convs = stage_convs + [pool[i] for i in idx]
        if not stage_convs:
            report.rl_stage_losses.append([])
            continue

        stage_losses = []
        for _epoch in range(config.epochs_rl):
            ordered = _stratified_order(stage_convs, rng)
            for batch in _conversation_batches(ordered, config.batch):
                X = np.concatenate([c.states for c in batch]).astype(np.float64)
                cache = _forward(model, X)
                p, v, logit = cache["p"], cache["v"], cache["logit"]
                G = np.empty_like(p)
                y = np.empty_like(p)
                offset = 0
                for c in batch:
                    t = len(c)
                    yc = float(c.outcome)
                    rewards = 1.0 - (p[offset : offset + t] - yc) ** 2
                    G[offset : offset + t] = discounted_returns(rewards, config.gamma)
                    y[offset : offset + t] = yc
                    offset += t
                advantage = G * model.return_scale - v
                step = config.lr0 * (1.0 + np.abs(p - y))
                desired = _sigmoid(logit + np.sign(advantage) * step)
                dp = np.clip(desired - p, -config.clip_eps, config.clip_eps)
                p_target = np.clip(p + dp, 1e-6, 1.0 - 1e-6)
                update_log.append(np.abs(p_target - p).astype(np.float32))
                loss, grads = rl_loss_and_grads(
                    model, X, p_target, G * model.return_scale, config.value_loss_weight
                )
                # plain SGD: the step stays proportional to the clipped
                # nudge, which is what keeps this phase conservative
                for name, g in grads.items():
                    lr_n = config.rl_value_lr if name in ("wv", "bv") else config.rl_optimizer_lr
                    getattr(model, name)[...] -= lr_n * g
                stage_losses.append(loss)
        report.rl_stage_losses.append([float(x) for x in stage_losses])
    report.rl_update_log = (
        np.concatenate(update_log) if update_log else np.zeros(0, dtype=np.float32)
    )
    report.phases.append(
        {"phase": "rl", "stages": list(config.curriculum_stages), "epochs_per_stage": config.epochs_rl}
    )
    return model, report


def train_member(
    dataset: list[EncodedConversation], config: TrainingConfig
) -> tuple[PolicyModel, TrainingReport]:
    """Full recipe for one ensemble member: supervised phase then RL phase.

    The supervised phase sees only regular conversations; adversarial ones
    enter through the RL curriculum's mixing rule.
    """
    clean = [c for c in dataset if not c.adversarial]
    model, sup_report = train_supervised(clean or dataset, config)
    model, rl_report = train_rl(model, dataset, config)
    report = TrainingReport(
        supervised_losses=sup_report.supervised_losses,
        rl_stage_losses=rl_report.rl_stage_losses,
        rl_update_log=rl_report.rl_update_log,
        phases=sup_report.phases + rl_report.phases,
    )
    return model, report


def train_ensemble(
    dataset: list[EncodedConversation], config: TrainingConfig
) -> tuple[list[PolicyModel], list[TrainingReport]]:
    if config.ensemble_k < 2:
        raise DataError("ensemble_k must be >= 2")
    models, reports = [], []
    for i in range(config.ensemble_k):
        member_config = replace(config, seed=config.seed + i)
        model, report = train_member(dataset, member_config)
        models.append(model)
        reports.append(report)
    return models, reports


# --- quantization -------------------------------------------------------------

@dataclass
class QuantizedModel:
    tensors_q: dict[str, np.ndarray]  # int8
    scales: dict[str, float]
    version: str = "1"
    seed: int = 0
    return_scale: float = 0.05

    def __post_init__(self):
        self._dequantized: dict[str, np.ndarray] | None = None

    @property
    def input_dim(self) -> int:
        return self.tensors_q["w1"].shape[0]

    def dequantized(self) -> dict[str, np.ndarray]:
        if self._dequantized is None:
            self._dequantized = {
                name: q.astype(np.float64) * self.scales[name] for name, q in self.tensors_q.items()
            }
        return self._dequantized

    def as_model(self) -> PolicyModel:
        t = self.dequantized()
        return PolicyModel(
            w1=t["w1"], b1=t["b1"], w2=t["w2"], b2=t["b2"],
            wp=t["wp"], bp=t["bp"], wv=t["wv"], bv=t["bv"],
            version=self.version, seed=self.seed, return_scale=self.return_scale,
        )


def quantize(model: PolicyModel) -> QuantizedModel:
    """Symmetric per-tensor int8: scale = max|W|/127, zero point 0."""
    tensors_q = {}
    scales = {}
    for name, tensor in model.tensors().items():
        peak = float(np.max(np.abs(tensor))) if tensor.size else 0.0
        scale = peak / 127.0 if peak > 0 else 1.0
        q = np.clip(np.round(tensor / scale), -127, 127).astype(np.int8)
        tensors_q[name] = q
        scales[name] = scale
    return QuantizedModel(
        tensors_q=tensors_q,
        scales=scales,
        version=model.version,
        seed=model.seed,
        return_scale=model.return_scale,
    )


def dequant_predict(qmodel: QuantizedModel, state: np.ndarray) -> float:
    return predict(qmodel.as_model(), state)


def dequant_predict_batch(qmodel: QuantizedModel, X: np.ndarray) -> np.ndarray:
    return predict_batch(qmodel.as_model(), X)


# --- serialization -------------------------------------------------------------

def _encode_tensor(arr: np.ndarray) -> dict:
    if arr.dtype == np.int8:
        dtype = "i1"
        data = arr.tobytes()
    else:
        dtype = "<f4"
        data = arr.astype("<f4").tobytes()
    return {"shape": list(arr.shape), "dtype": dtype, "data": base64.b64encode(data).decode("ascii")}


def _decode_tensor(spec: dict) -> np.ndarray:
    raw = base64.b64decode(spec["data"])
    arr = np.frombuffer(raw, dtype=spec["dtype"]).reshape(spec["shape"]).copy()
    if spec["dtype"] == "<f4":
        arr = arr.astype(np.float64)
    return arr


def save_model(model: PolicyModel | QuantizedModel, path: str | Path) -> None:
    if isinstance(model, QuantizedModel):
        doc = {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "policy_int8",
            "version": model.version,
            "seed": model.seed,
            "tensors": {name: _encode_tensor(q) for name, q in model.tensors_q.items()},
            "return_scale": model.return_scale,
            "quantization": {"scheme": "symmetric_per_tensor", "scales": model.scales, "zero_point": 0},
        }
    else:
        doc = {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "policy_float32",
            "version": model.version,
            "seed": model.seed,
            "tensors": {name: _encode_tensor(t) for name, t in model.tensors().items()},
            "return_scale": model.return_scale,
        }
    Path(path).write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")


def load_model(path: str | Path) -> PolicyModel | QuantizedModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise FormatVersionError(f"unsupported model format version: {doc.get('format_version')!r}")
    tensors = {name: _decode_tensor(spec) for name, spec in doc["tensors"].items()}
    if doc["kind"] == "policy_int8":
        return QuantizedModel(
            tensors_q={k: v.astype(np.int8) for k, v in tensors.items()},
            scales={k: float(v) for k, v in doc["quantization"]["scales"].items()},
            version=doc["version"],
            seed=int(doc["seed"]),
            return_scale=float(doc.get("return_scale", 0.05)),
        )
    if doc["kind"] == "policy_float32":
        return PolicyModel(
            **tensors,
            version=doc["version"],
            seed=int(doc["seed"]),
            return_scale=float(doc.get("return_scale", 0.05)),
        )
    raise FormatVersionError(f"unknown model kind: {doc['kind']!r}")
