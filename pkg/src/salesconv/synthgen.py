"""Synthetic sales-conversation generator with known latent dynamics.

Every conversation is produced in two passes from one seed: a latent pass
that fixes speakers, rep quality, customer events, and the per-turn
conversion propensity, then a text pass that renders turns from template
banks. The latent pass alone is reused to tune the initial-propensity
distribution against the configured negative-outcome share, so tuning and
generation can never drift apart.

Propensity update per customer step:

    p' = clamp01(p + drift_alpha * (rep_quality - 0.5)
                   + event_beta * event_effect
                   + noise)            # gaussian, clipped to 4 sigma

which bounds |p' - p| by drift_alpha * 0.5 + event_beta * 0.15
+ 4 * noise_sigma.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Protocol

from . import templates as tpl
from .convo import CUSTOMER, REP, Conversation, Turn
from .errors import ConfigurationError

EVENT_EFFECTS = {
    "objection_raise": -0.15,
    "objection_resolve": 0.12,
    "interest_signal": 0.10,
    "question": 0.0,
    "smalltalk": 0.0,
}
MAX_EVENT_EFFECT = max(abs(v) for v in EVENT_EFFECTS.values())

# Out-of-distribution runs shift the dynamics coefficients.
OOD_EFFECTS = {
    "objection_raise": -0.20,
    "objection_resolve": 0.08,
    "interest_signal": 0.14,
    "question": 0.0,
    "smalltalk": 0.02,
}
OOD_DRIFT_SCALE = 1.6
OOD_NOISE_SCALE = 2.0

SAME_SPEAKER_PROB = 0.08

_PILOT_TRIALS = 12000
_PILOT_SEED = 0x5EED_1DEA


def _uniform_mix() -> tuple[tuple[str, float], ...]:
    w = 1.0 / len(tpl.INDUSTRIES)
    return tuple((ind, w) for ind in tpl.INDUSTRIES)


@dataclass(frozen=True)
class GeneratorConfig:
    length_min: int = 3
    length_max: int = 27
    length_median_target: int = 8
    negative_share_target: float = 0.56
    industry_mix: tuple[tuple[str, float], ...] = field(default_factory=_uniform_mix)
    drift_alpha: float = 0.10
    event_beta: float = 1.0
    noise_sigma: float = 0.02
    initial_concentration: float = 1.5
    rep_quality_fixed: float | None = None
    seed: int = 0

    def validate(self) -> None:
        if not (self.length_min <= self.length_median_target <= self.length_max):
            raise ConfigurationError("need length_min <= length_median_target <= length_max")
        if self.length_min < 1:
            raise ConfigurationError("length_min must be >= 1")
        if not (0.0 < self.negative_share_target < 1.0):
            raise ConfigurationError("negative_share_target must be in (0,1)")
        if self.noise_sigma < 0 or self.drift_alpha < 0 or self.event_beta < 0:
            raise ConfigurationError("dynamics coefficients must be non-negative")
        if not self.industry_mix:
            raise ConfigurationError("industry_mix is empty")
        if any(w < 0 for _, w in self.industry_mix) or sum(w for _, w in self.industry_mix) <= 0:
            raise ConfigurationError("industry_mix weights must be non-negative, sum > 0")
        if self.rep_quality_fixed is not None and not (0.0 <= self.rep_quality_fixed <= 1.0):
            raise ConfigurationError("rep_quality_fixed must be in [0,1]")

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        kw = dict(d)
        if "industry_mix" in kw and isinstance(kw["industry_mix"], dict):
            kw["industry_mix"] = tuple(sorted(kw["industry_mix"].items()))
        cfg = cls(**kw)
        cfg.validate()
        return cfg


@dataclass
class LatentCustomerState:
    propensity: float = 0.5
    engagement: float = 0.5
    open_objections: set[str] = field(default_factory=set)
    interest_level: float = 0.3

    def clamped(self) -> "LatentCustomerState":
        return LatentCustomerState(
            propensity=_clamp01(self.propensity),
            engagement=_clamp01(self.engagement),
            open_objections=set(self.open_objections),
            interest_level=_clamp01(self.interest_level),
        )


class ExternalTextGenerator(Protocol):
    """Interface for an LLM-backed text source; intentionally unimplemented."""

    def customer_utterance(self, context: dict) -> str: ...

    def rep_utterance(self, context: dict) -> str: ...


def _clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else 1.0 if x > 1.0 else x


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def derive_seed(seed: int, index: int) -> int:
    """Stable per-item seed so parallel generation is order-independent."""
    return splitmix64((seed & 0xFFFFFFFFFFFFFFFF) ^ splitmix64(index & 0xFFFFFFFFFFFFFFFF))


# --- length distribution -------------------------------------------------

@lru_cache(maxsize=32)
def _length_ratio(length_min: int, length_max: int, median_target: int) -> float:
    """Truncated-geometric decay ratio whose distribution median sits at the target."""
    span = length_max - length_min

    def centered_cdf(r: float) -> float:
        weights = [r**k for k in range(span + 1)]
        total = sum(weights)
        upto_m = sum(weights[: median_target - length_min + 1]) / total
        upto_prev = sum(weights[: median_target - length_min]) / total
        return 0.5 * (upto_m + upto_prev)

    lo, hi = 0.30, 0.9999
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        # centered_cdf decreases as r grows (mass shifts to longer lengths)
        if centered_cdf(mid) > 0.5:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _sample_length(config: GeneratorConfig, rng: random.Random) -> int:
    r = _length_ratio(config.length_min, config.length_max, config.length_median_target)
    span = config.length_max - config.length_min
    weights = [r**k for k in range(span + 1)]
    total = sum(weights)
    u = rng.random() * total
    acc = 0.0
    for k, w in enumerate(weights):
        acc += w
        if u <= acc:
            return config.length_min + k
    return config.length_max


# --- latent trajectory ----------------------------------------------------

@dataclass
class _LatentTurn:
    speaker: str
    rep_quality: float
    event: str | None            # customer turns only
    objection_kind: str | None
    propensity: float            # after this turn
    movement: float              # propensity delta caused by this turn
    engagement: float
    latency_ms: int


@dataclass
class _Trajectory:
    industry: str
    product: str
    turns: list[_LatentTurn]
    initial_propensity: float


def _pick_industry(config: GeneratorConfig, rng: random.Random) -> str:
    total = sum(w for _, w in config.industry_mix)
    u = rng.random() * total
    acc = 0.0
    for ind, w in config.industry_mix:
        acc += w
        if u <= acc:
            return ind
    return config.industry_mix[-1][0]


def _event_weights(
    rep_quality: float, propensity: float, open_objections: set[str], mode: str
) -> list[tuple[str, float]]:
    # Event likelihoods follow the customer's current stance: sceptical
    # customers object more, warm customers signal interest, so propensity
    # paths self-reinforce toward a decision.
    raise_w = 0.16 * (1.6 - rep_quality) * (1.5 - propensity)
    resolve_w = 0.14 * (0.4 + rep_quality) * (0.5 + propensity) if open_objections else 0.0
    interest_w = 0.10 * (0.5 + rep_quality) * (0.4 + 1.2 * propensity)
    if mode == "adversarial":
        raise_w *= 2.6
        resolve_w *= 0.20
    return [
        ("objection_raise", raise_w),
        ("objection_resolve", resolve_w),
        ("interest_signal", interest_w),
        ("question", 0.22),
        ("smalltalk", 0.30),
    ]


def _sample_event(
    rep_quality: float, propensity: float, open_objections: set[str], mode: str, rng: random.Random
) -> str:
    pairs = _event_weights(rep_quality, propensity, open_objections, mode)
    total = sum(w for _, w in pairs)
    u = rng.random() * total
    acc = 0.0
    for name, w in pairs:
        acc += w
        if u <= acc:
            return name
    return pairs[-1][0]


def _dynamics(config: GeneratorConfig, mode: str) -> tuple[float, dict, float]:
    if mode == "ood":
        return (
            config.drift_alpha * OOD_DRIFT_SCALE,
            OOD_EFFECTS,
            config.noise_sigma * OOD_NOISE_SCALE,
        )
    return config.drift_alpha, EVENT_EFFECTS, config.noise_sigma


def _apply_customer_step(
    latent: LatentCustomerState,
    rep_quality: float,
    event: str,
    config: GeneratorConfig,
    rng: random.Random,
    mode: str = "normal",
) -> tuple[LatentCustomerState, float]:
    """Advance the latent state one customer turn; returns (state', movement)."""
    alpha, effects, sigma = _dynamics(config, mode)
    noise = 0.0
    if sigma > 0:
        noise = rng.gauss(0.0, sigma)
        noise = max(-4.0 * sigma, min(4.0 * sigma, noise))
    delta = alpha * (rep_quality - 0.5) + config.event_beta * effects[event] + noise
    new_p = _clamp01(latent.propensity + delta)
    movement = new_p - latent.propensity

    objections = set(latent.open_objections)
    if event == "objection_raise":
        objections.add(rng.choice(tpl.OBJECTION_KINDS))
    elif event == "objection_resolve" and objections:
        objections.discard(rng.choice(sorted(objections)))

    interest = latent.interest_level
    if event == "interest_signal":
        interest = _clamp01(interest + 0.15)
    else:
        interest = _clamp01(interest - 0.02)

    eng = latent.engagement + 0.15 * (new_p - latent.engagement) + rng.gauss(0.0, 0.06)
    if event == "interest_signal":
        eng += 0.08
    elif event == "objection_raise":
        eng -= 0.05
    return (
        LatentCustomerState(
            propensity=new_p,
            engagement=_clamp01(eng),
            open_objections=objections,
            interest_level=interest,
        ),
        movement,
    )


def _initial_propensity(config: GeneratorConfig, mode: str, rng: random.Random) -> float:
    if mode == "adversarial":
        mean, conc = 0.35, 10.0
    elif mode == "ood":
        mean, conc = 0.50, 2.0
    else:
        mean = _tuned_initial_mean(config)
        conc = config.initial_concentration
    a = max(1e-3, mean * conc)
    b = max(1e-3, (1.0 - mean) * conc)
    return rng.betavariate(a, b)


def _rep_quality_sample(config: GeneratorConfig, mode: str, rng: random.Random) -> float:
    if config.rep_quality_fixed is not None:
        return config.rep_quality_fixed
    q = rng.betavariate(2.0, 2.0)
    if mode == "adversarial":
        q *= 0.30
    return q


def _customer_latency(engagement: float, rng: random.Random) -> int:
    mean_ms = 700.0 + 14000.0 * (1.0 - engagement) ** 2
    return max(1, int(mean_ms * math.exp(rng.gauss(0.0, 0.35))))


def _rep_latency(rng: random.Random) -> int:
    return max(1, int(1500.0 * math.exp(rng.gauss(0.0, 0.4))))


def _simulate_trajectory(
    config: GeneratorConfig, rng: random.Random, mode: str, initial_mean_override: float | None = None
) -> _Trajectory:
    industry = _pick_industry(config, rng)
    if mode == "ood":
        product = rng.choice(tpl.OOD_PRODUCTS)
    else:
        product = rng.choice(tpl.INDUSTRY_PRODUCTS[industry])

    length = _sample_length(config, rng)
    if initial_mean_override is not None:
        conc = config.initial_concentration
        a = max(1e-3, initial_mean_override * conc)
        b = max(1e-3, (1.0 - initial_mean_override) * conc)
        p0 = rng.betavariate(a, b)
    else:
        p0 = _initial_propensity(config, mode, rng)

    latent = LatentCustomerState(propensity=p0, engagement=0.5, interest_level=0.3)
    turns: list[_LatentTurn] = []
    last_quality = 0.5
    speaker = REP
    for i in range(length):
        if speaker == REP:
            q = _rep_quality_sample(config, mode, rng)
            last_quality = q
            turns.append(
                _LatentTurn(
                    speaker=REP,
                    rep_quality=q,
                    event=None,
                    objection_kind=None,
                    propensity=latent.propensity,
                    movement=0.0,
                    engagement=latent.engagement,
                    latency_ms=0 if i == 0 else _rep_latency(rng),
                )
            )
        else:
            event = _sample_event(last_quality, latent.propensity, latent.open_objections, mode, rng)
            before = set(latent.open_objections)
            latent, movement = _apply_customer_step(latent, last_quality, event, config, rng, mode)
            kind = None
            if event == "objection_raise":
                added = latent.open_objections - before
                kind = next(iter(added)) if added else rng.choice(sorted(before))
            elif event == "objection_resolve":
                removed = before - latent.open_objections
                kind = next(iter(removed)) if removed else None
            turns.append(
                _LatentTurn(
                    speaker=CUSTOMER,
                    rep_quality=last_quality,
                    event=event,
                    objection_kind=kind,
                    propensity=latent.propensity,
                    movement=movement,
                    engagement=latent.engagement,
                    latency_ms=_customer_latency(latent.engagement, rng),
                )
            )
        if i == 0:
            speaker = CUSTOMER  # the customer always answers the opener
        elif rng.random() >= SAME_SPEAKER_PROB:
            speaker = CUSTOMER if speaker == REP else REP
    return _Trajectory(industry=industry, product=product, turns=turns, initial_propensity=p0)


def _config_dynamics_key(config: GeneratorConfig) -> tuple:
    return (
        config.length_min,
        config.length_max,
        config.length_median_target,
        config.negative_share_target,
        config.drift_alpha,
        config.event_beta,
        config.noise_sigma,
        config.initial_concentration,
        config.rep_quality_fixed,
    )


@lru_cache(maxsize=64)
def _tuned_initial_mean_cached(key: tuple) -> float:
    (length_min, length_max, median_target, neg_target, alpha, beta, sigma, conc, rq_fixed) = key
    probe = GeneratorConfig(
        length_min=length_min,
        length_max=length_max,
        length_median_target=median_target,
        negative_share_target=neg_target,
        drift_alpha=alpha,
        event_beta=beta,
        noise_sigma=sigma,
        initial_concentration=conc,
        rep_quality_fixed=rq_fixed,
    )

    def realized_negative_share(mean: float) -> float:
        # E[1 - p_final]; identical random stream per candidate mean keeps
        # the bisection objective smooth.
        total = 0.0
        for i in range(_PILOT_TRIALS):
            rng = random.Random(derive_seed(_PILOT_SEED, i))
            traj = _simulate_trajectory(probe, rng, "normal", initial_mean_override=mean)
            total += 1.0 - traj.turns[-1].propensity
        return total / _PILOT_TRIALS

    lo, hi = 0.02, 0.98
    for _ in range(18):
        mid = 0.5 * (lo + hi)
        if realized_negative_share(mid) > neg_target:
            lo = mid  # too many negatives: raise the initial mean
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _tuned_initial_mean(config: GeneratorConfig) -> float:
    return _tuned_initial_mean_cached(_config_dynamics_key(config))


# --- text rendering -------------------------------------------------------

def _flavor_from_level(p: float) -> str:
    if p < 0.2:
        return "very_neg"
    if p < 0.4:
        return "neg"
    if p < 0.6:
        return "neu"
    if p < 0.8:
        return "pos"
    return "very_pos"


def _flavor_from_inverted_movement(movement: float, cumulative: float) -> str:
    # Clamped propensity can make a step's movement exactly zero; fall back
    # to the trajectory's cumulative movement so the surface tone still
    # opposes where the conversation has actually gone.
    basis = movement if abs(movement) > 1e-12 else cumulative
    if basis < -1e-12:
        return "very_pos" if basis < -0.08 else "pos"
    if basis > 1e-12:
        return "very_neg" if basis > 0.08 else "neg"
    return "neu"


def _banks(mode: str) -> dict:
    if mode == "ood":
        return {
            "raise": tpl.OOD_CUSTOMER_OBJECTION_RAISE,
            "resolve": tpl.OOD_CUSTOMER_OBJECTION_RESOLVE,
            "interest": tpl.OOD_CUSTOMER_INTEREST,
            "question": tpl.OOD_CUSTOMER_QUESTION,
            "smalltalk": tpl.OOD_CUSTOMER_SMALLTALK,
            "flavor": tpl.OOD_FLAVOR_CLAUSES,
            "elaborations": tpl.OOD_CUSTOMER_ELABORATIONS,
            "rep_openers": tpl.OOD_REP_OPENERS,
            "rep_neutral": tpl.OOD_REP_NEUTRAL,
            "rep_weak": tpl.OOD_REP_WEAK,
            "rep_technique": None,
            "rep_address": None,
        }
    return {
        "raise": tpl.CUSTOMER_OBJECTION_RAISE,
        "resolve": tpl.CUSTOMER_OBJECTION_RESOLVE,
        "interest": tpl.CUSTOMER_INTEREST,
        "question": tpl.CUSTOMER_QUESTION,
        "smalltalk": tpl.CUSTOMER_SMALLTALK,
        "flavor": tpl.FLAVOR_CLAUSES,
        "elaborations": tpl.CUSTOMER_ELABORATIONS,
        "rep_openers": tpl.REP_OPENERS,
        "rep_neutral": tpl.REP_NEUTRAL,
        "rep_weak": tpl.REP_WEAK,
        "rep_technique": tpl.REP_TECHNIQUE,
        "rep_address": tpl.REP_ADDRESS_OBJECTION,
    }


def _customer_text(
    lt: _LatentTurn,
    product: str,
    mode: str,
    interest_level: float,
    open_objections: set[str],
    rng: random.Random,
    cumulative: float = 0.0,
) -> str:
    banks = _banks(mode)
    event = lt.event or "smalltalk"
    if event == "objection_raise":
        kind = lt.objection_kind or "price"
        clause = rng.choice(banks["raise"][kind])
    elif event == "objection_resolve":
        kind = lt.objection_kind
        if kind is None:
            clause = rng.choice(banks["smalltalk"])
        else:
            clause = rng.choice(banks["resolve"][kind])
    elif event == "interest_signal":
        clause = rng.choice(banks["interest"])
    elif event == "question":
        clause = rng.choice(banks["question"])
    else:
        clause = rng.choice(banks["smalltalk"])
    parts = [tpl.render(clause, product)]

    if mode == "adversarial":
        flavor = _flavor_from_inverted_movement(lt.movement, cumulative)
        parts.append(rng.choice(banks["flavor"][flavor]))
    else:
        reveal_prob = 0.35 + 0.25 * interest_level
        if rng.random() < reveal_prob:
            flavor = _flavor_from_level(lt.propensity)
            if rng.random() < 0.15:  # occasional muted phrasing
                order = ["very_neg", "neg", "neu", "pos", "very_pos"]
                idx = order.index(flavor)
                flavor = order[idx + (1 if idx < 2 else -1 if idx > 2 else 0)]
            parts.append(rng.choice(banks["flavor"][flavor]))

    if rng.random() < 0.5 * lt.engagement:
        parts.append(rng.choice(banks["elaborations"]))
    return " ".join(parts)


def _rep_text(
    lt: _LatentTurn,
    product: str,
    mode: str,
    is_opener: bool,
    open_objections: set[str],
    rng: random.Random,
) -> str:
    banks = _banks(mode)
    if is_opener:
        return tpl.render(rng.choice(banks["rep_openers"]), product)
    q = lt.rep_quality
    if banks["rep_address"] and open_objections and q >= 0.45 and rng.random() < 0.5:
        kind = rng.choice(sorted(open_objections))
        return tpl.render(rng.choice(banks["rep_address"][kind]), product)
    if banks["rep_technique"] and q > 0.62:
        technique = rng.choice(sorted(banks["rep_technique"]))
        return tpl.render(rng.choice(banks["rep_technique"][technique]), product)
    if q < 0.38:
        return tpl.render(rng.choice(banks["rep_weak"]), product)
    return tpl.render(rng.choice(banks["rep_neutral"]), product)


# --- public operations ----------------------------------------------------

def step_customer(
    latent: LatentCustomerState,
    rep_quality: float,
    rng: random.Random,
    config: GeneratorConfig | None = None,
    event: str | None = None,
    product: str = "workflow suite",
    now_ms: int = 0,
) -> tuple[LatentCustomerState, Turn]:
    """One customer reaction to a rep utterance of the given quality.

    ``event`` forces the sampled event kind when provided; inputs are
    clamped rather than rejected.
    """
    config = config or GeneratorConfig()
    rep_quality = _clamp01(rep_quality)
    latent = latent.clamped()
    chosen = event or _sample_event(rep_quality, latent.propensity, latent.open_objections, "normal", rng)
    before = set(latent.open_objections)
    new_latent, movement = _apply_customer_step(latent, rep_quality, chosen, config, rng, "normal")
    kind = None
    if chosen == "objection_raise":
        added = new_latent.open_objections - before
        kind = next(iter(added)) if added else (sorted(before)[0] if before else None)
    elif chosen == "objection_resolve":
        removed = before - new_latent.open_objections
        kind = next(iter(removed)) if removed else None
    lt = _LatentTurn(
        speaker=CUSTOMER,
        rep_quality=rep_quality,
        event=chosen,
        objection_kind=kind,
        propensity=new_latent.propensity,
        movement=movement,
        engagement=new_latent.engagement,
        latency_ms=_customer_latency(new_latent.engagement, rng),
    )
    text = _customer_text(lt, product, "normal", new_latent.interest_level, new_latent.open_objections, rng)
    turn = Turn(
        speaker=CUSTOMER,
        text=text,
        timestamp_ms=now_ms + lt.latency_ms,
        response_latency_ms=lt.latency_ms,
    )
    return new_latent, turn


def _generate(config: GeneratorConfig, seed: int, mode: str, conv_id: str | None = None) -> Conversation:
    config.validate()
    traj_rng = random.Random(derive_seed(seed, 1))
    text_rng = random.Random(derive_seed(seed, 2))
    traj = _simulate_trajectory(config, traj_rng, mode)

    turns: list[Turn] = []
    trace: list[float] = []
    now = 0
    open_objections: set[str] = set()
    interest = 0.3
    for i, lt in enumerate(traj.turns):
        if lt.speaker == CUSTOMER:
            if lt.event == "objection_raise" and lt.objection_kind:
                open_objections.add(lt.objection_kind)
            elif lt.event == "objection_resolve" and lt.objection_kind:
                open_objections.discard(lt.objection_kind)
            if lt.event == "interest_signal":
                interest = _clamp01(interest + 0.15)
            else:
                interest = _clamp01(interest - 0.02)
            text = _customer_text(
                lt, traj.product, mode, interest, open_objections, text_rng,
                cumulative=lt.propensity - traj.initial_propensity,
            )
        else:
            text = _rep_text(lt, traj.product, mode, i == 0, open_objections, text_rng)
        latency = lt.latency_ms if i > 0 else 0
        now = now + max(1, latency) if i > 0 else 0
        turns.append(Turn(speaker=lt.speaker, text=text, timestamp_ms=now, response_latency_ms=latency))
        trace.append(lt.propensity)

    final_p = trace[-1]
    outcome = traj_rng.random() < final_p
    conv = Conversation(
        id=conv_id or f"conv-{seed & 0xFFFFFFFFFFFFFFFF:016x}",
        industry=traj.industry,
        turns=turns,
        outcome=outcome,
        propensity_trace=trace,
        adversarial=(mode == "adversarial"),
    )
    conv.validate()
    return conv


def generate_conversation(config: GeneratorConfig, seed: int) -> Conversation:
    return _generate(config, seed, "normal")


def generate_adversarial(config: GeneratorConfig, seed: int) -> Conversation:
    """Conversation whose customer text sentiment opposes each propensity move."""
    return _generate(config, seed, "adversarial")


def generate_ood(config: GeneratorConfig, seed: int) -> Conversation:
    """Conversation drawn from the disjoint template bank with shifted dynamics."""
    return _generate(config, seed, "ood")


@dataclass
class DatasetStats:
    n: int
    length_median: float
    length_min: int
    length_max: int
    negative_share: float
    industry_histogram: dict[str, int]
    adversarial_share: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "length_median": self.length_median,
            "length_min": self.length_min,
            "length_max": self.length_max,
            "negative_share": self.negative_share,
            "industry_histogram": dict(sorted(self.industry_histogram.items())),
            "adversarial_share": self.adversarial_share,
        }


def compute_stats(conversations: list[Conversation]) -> DatasetStats:
    lengths = sorted(len(c.turns) for c in conversations)
    n = len(lengths)
    mid = n // 2
    median = float(lengths[mid]) if n % 2 else 0.5 * (lengths[mid - 1] + lengths[mid])
    histogram: dict[str, int] = {}
    for c in conversations:
        histogram[c.industry] = histogram.get(c.industry, 0) + 1
    negatives = sum(1 for c in conversations if c.outcome is False)
    adversarial = sum(1 for c in conversations if c.adversarial)
    return DatasetStats(
        n=n,
        length_median=median,
        length_min=lengths[0],
        length_max=lengths[-1],
        negative_share=negatives / n,
        industry_histogram=histogram,
        adversarial_share=adversarial / n,
    )


def generate_dataset(
    n: int, config: GeneratorConfig, seed: int, adversarial_share: float = 0.0
) -> tuple[list[Conversation], DatasetStats]:
    """Generate ``n`` conversations with per-item derived seeds.

    ``adversarial_share`` mixes in sentiment-inverted conversations at the
    given rate (used for RL-phase training data, 0 for plain datasets).
    """
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    config.validate()
    conversations = []
    for i in range(n):
        item_seed = derive_seed(seed, i)
        mode = "adversarial" if adversarial_share > 0 and (i % max(1, round(1 / adversarial_share))) == 0 else "normal"
        conversations.append(_generate(config, item_seed, mode, conv_id=f"conv-{i:06d}-{item_seed & 0xFFFFFF:06x}"))
    return conversations, compute_stats(conversations)
