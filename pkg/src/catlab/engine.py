"""Adaptive-session state machine: study configuration, the adaptive loop,
stopping rules, persistence snapshots, and result assembly.

A session is single-writer; the caller serializes mutations per session_id.
All randomness flows through the session's own seeded generator, so a session
re-run with the same config, bank, seed and response sequence reproduces the
identical item sequence, trajectory and result.
"""

from __future__ import annotations

import hashlib
import json
import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .bank import ItemBank
from .errors import ResponseConflictError, SessionStateError
from .estimation import (
    AbilityEstimate,
    ESTIMATION_METHODS,
    Prior,
    estimate_eap,
    fallback_chain,
)
from .irt import ItemParameters, Response
from .selection import (
    ExposureLedger,
    SelectionWeights,
    best_item,
    constrained_scores,
    information_scores,
    precision_weighted_scores,
    record_administration,
    sympson_hetter_filter,
    top_items,
)

SNAPSHOT_SCHEMA = 1
WARM_START_POOL = 5
RANDOMESQUE_POOL = 5
CRITERIA = ("MFI", "MFI_PRECISION", "CONSTRAINED")


class Phase(str, Enum):
    CREATED = "Created"
    DEMOGRAPHICS = "Demographics"
    RUNNING = "Running"
    FINISHED = "Finished"
    EXPIRED = "Expired"


class StopReason(str, Enum):
    SEM_REACHED = "SEM_REACHED"
    MAX_ITEMS = "MAX_ITEMS"
    POOL_EXHAUSTED = "POOL_EXHAUSTED"


@dataclass(frozen=True)
class StopDecision:
    reason: StopReason
    message: str = ""


@dataclass(frozen=True)
class CutoffBand:
    """Half-open classification band [lo, hi); the last band closes at +inf."""

    label: str
    lo: float
    hi: float


@dataclass(frozen=True)
class DemographicField:
    name: str
    kind: str = "text"  # "text" | "integer"
    required: bool = True


@dataclass
class StudyConfig:
    """Full testing policy for one study."""

    name: str
    model: str
    max_items: int
    min_items: int
    min_sem: float
    estimation_method: str = "EAP"
    alternate_method: str | None = None
    criteria: str = "MFI"
    adaptive_start: int = 0
    exposure_control: bool = False
    exposure_target: float | Mapping[str, float] = 0.25
    weights: SelectionWeights = field(default_factory=SelectionWeights)
    group_targets: dict[str, float] | None = None
    cutoffs: tuple[CutoffBand, ...] | None = None
    demographics: tuple[DemographicField, ...] = ()
    session_save: bool = False
    results_webhook: str | None = None
    seed: int | None = None
    language: str = "en"
    prior_mean: float = 0.0
    prior_sd: float = 1.0
    tie_breaking: str = "lexicographic"  # or "randomesque"
    expose_running_se: bool = False
    expose_running_theta: bool = False
    session_timeout_s: float = 1800.0

    @property
    def prior(self) -> Prior:
        return Prior(self.prior_mean, self.prior_sd)


@dataclass
class SessionState:
    """One examinee's administration, including its private RNG."""

    session_id: str
    phase: Phase
    administered: list[str] = field(default_factory=list)
    responses: list[Response] = field(default_factory=list)
    trajectory: list[AbilityEstimate] = field(default_factory=list)
    ledger: ExposureLedger = field(default_factory=ExposureLedger)
    rng: np.random.Generator = field(default_factory=np.random.default_rng)
    seed: object = None
    created_at: float = 0.0
    last_activity: float = 0.0
    demographics: dict | None = None
    stop: StopDecision | None = None

    @property
    def outstanding_item(self) -> str | None:
        if len(self.administered) == len(self.responses) + 1:
            return self.administered[-1]
        return None


@dataclass(frozen=True)
class ItemRecord:
    item_id: str
    value: int
    theta: float
    se: float
    method: str
    latency_ms: int | None = None


@dataclass(frozen=True)
class SessionResult:
    session_id: str
    final: AbilityEstimate
    n_items: int
    records: tuple[ItemRecord, ...]
    stop_reason: StopReason | None
    disposition: str  # "Finished" | "Expired"
    duration_s: float
    classification: str | None = None
    demographics: dict | None = None


def validate_config(config: StudyConfig, bank: ItemBank | None = None) -> list[str]:
    """Return every configuration violation; an empty list means valid."""
    problems: list[str] = []
    if config.model not in ("1PL", "2PL", "3PL", "GRM"):
        problems.append(f"unknown model {config.model!r}")
    if config.min_items < 1:
        problems.append("min_items must be at least 1")
    if config.min_items > config.max_items:
        problems.append(f"min_items {config.min_items} exceeds max_items {config.max_items}")
    if config.min_sem <= 0:
        problems.append("min_sem must be positive")
    if config.adaptive_start < 0 or config.adaptive_start > config.max_items:
        problems.append("adaptive_start must lie in [0, max_items]")
    if config.estimation_method not in ESTIMATION_METHODS:
        problems.append(f"unknown estimation method {config.estimation_method!r}")
    if config.alternate_method is not None and config.alternate_method not in ESTIMATION_METHODS:
        problems.append(f"unknown alternate method {config.alternate_method!r}")
    if config.criteria not in CRITERIA:
        problems.append(f"unknown selection criterion {config.criteria!r}")
    if config.prior_sd <= 0:
        problems.append("prior_sd must be positive")
    if config.tie_breaking not in ("lexicographic", "randomesque"):
        problems.append(f"unknown tie_breaking {config.tie_breaking!r}")
    if config.cutoffs:
        bands = sorted(config.cutoffs, key=lambda band: band.lo)
        if bands[0].lo != -np.inf:
            problems.append("first cutoff band must start at -inf")
        if bands[-1].hi != np.inf:
            problems.append("last cutoff band must end at +inf")
        for left, right in zip(bands, bands[1:]):
            if left.hi != right.lo:
                problems.append(
                    f"cutoff bands {left.label!r} and {right.label!r} do not tile the line"
                )
        if len({band.label for band in bands}) != len(bands):
            problems.append("cutoff band labels must be unique")
    if config.group_targets:
        for group, share in config.group_targets.items():
            if not 0 < share <= 1:
                problems.append(f"group target for {group!r} must lie in (0, 1]")
        if sum(config.group_targets.values()) > 1 + 1e-9:
            problems.append("group targets sum to more than 1")
    for demo_field in config.demographics:
        if demo_field.kind not in ("text", "integer"):
            problems.append(f"demographic field {demo_field.name!r} has unknown kind {demo_field.kind!r}")
    if bank is not None:
        if config.model != bank.model:
            problems.append(f"config model {config.model} does not match bank model {bank.model}")
        if config.max_items > len(bank):
            problems.append(f"max_items {config.max_items} exceeds bank size {len(bank)}")
        if config.group_targets:
            for group in config.group_targets:
                if group not in bank.groups:
                    problems.append(f"group target references unknown group {group!r}")
        if isinstance(config.exposure_target, Mapping):
            for item_id in config.exposure_target:
                if item_id not in bank:
                    problems.append(f"exposure target references unknown item {item_id!r}")
    return problems


def validate_demographics(config: StudyConfig, payload: Mapping | None) -> list[str]:
    """Field-level validation of a demographics payload against the config."""
    payload = payload or {}
    problems = []
    for demo_field in config.demographics:
        value = payload.get(demo_field.name)
        if value is None or value == "":
            if demo_field.required:
                problems.append(f"{demo_field.name}: required")
            continue
        if demo_field.kind == "integer":
            try:
                int(str(value))
            except ValueError:
                problems.append(f"{demo_field.name}: expected an integer, got {value!r}")
    for key in payload:
        if key not in {f.name for f in config.demographics}:
            problems.append(f"{key}: unknown field")
    return problems


def start_session(
    config: StudyConfig,
    bank: ItemBank,
    *,
    ledger: ExposureLedger | None = None,
    seed=None,
    session_id: str | None = None,
    now: float | None = None,
) -> SessionState:
    """Create a fresh seeded session in the Created (or Demographics) phase."""
    problems = validate_config(config, bank)
    if problems:
        raise ValueError("invalid config: " + "; ".join(problems))
    if seed is None:
        seed = config.seed
    if seed is None:
        seed = int(np.random.SeedSequence().entropy % (2**63))
    now = time.time() if now is None else now
    if ledger is None:
        target = config.exposure_target if config.exposure_control else 1.0
        ledger = ExposureLedger.for_bank(bank, target)
    ledger.record_session()
    return SessionState(
        session_id=session_id or uuid.uuid4().hex,
        phase=Phase.DEMOGRAPHICS if config.demographics else Phase.CREATED,
        ledger=ledger,
        rng=np.random.default_rng(seed),
        seed=seed,
        created_at=now,
        last_activity=now,
    )


def begin_session(
    state: SessionState,
    config: StudyConfig,
    demographics: Mapping | None = None,
    now: float | None = None,
) -> SessionState:
    """Transition Created/Demographics -> Running, validating demographics."""
    if state.phase not in (Phase.CREATED, Phase.DEMOGRAPHICS):
        raise SessionStateError(f"cannot begin a session in phase {state.phase.value}")
    if config.demographics:
        problems = validate_demographics(config, demographics)
        if problems:
            raise ValueError("invalid demographics: " + "; ".join(problems))
        state.demographics = dict(demographics or {})
    state.phase = Phase.RUNNING
    state.last_activity = time.time() if now is None else now
    return state


def current_estimate(state: SessionState, config: StudyConfig) -> AbilityEstimate:
    if state.trajectory:
        return state.trajectory[-1]
    return AbilityEstimate(config.prior_mean, config.prior_sd, "EAP", converged=True)


def stop_check(state: SessionState, config: StudyConfig) -> StopDecision | None:
    """Evaluate the termination rules; SEM wins when both fire at once."""
    n = len(state.responses)
    se = state.trajectory[-1].se if state.trajectory else np.inf
    if n >= config.min_items and se <= config.min_sem:
        return StopDecision(StopReason.SEM_REACHED, f"se {se:.4f} <= {config.min_sem}")
    if n >= config.max_items:
        return StopDecision(StopReason.MAX_ITEMS, f"administered {n} items")
    return None


def _pool_stop(state: SessionState, config: StudyConfig, remaining: Sequence[str]) -> StopDecision | None:
    if remaining:
        return None
    message = "item pool exhausted"
    if len(state.responses) < config.min_items:
        message += f" before min_items={config.min_items}"
    return StopDecision(StopReason.POOL_EXHAUSTED, message)


def _pick(
    state: SessionState,
    config: StudyConfig,
    bank: ItemBank,
    scores: np.ndarray,
    eligible: Sequence[str],
) -> str:
    if config.tie_breaking == "randomesque":
        top = top_items(bank, scores, eligible, RANDOMESQUE_POOL)
        return top[int(state.rng.integers(len(top)))]
    return best_item(bank, scores, eligible)


def _criterion_scores(
    state: SessionState, config: StudyConfig, bank: ItemBank, estimate: AbilityEstimate
) -> np.ndarray:
    if config.criteria == "MFI":
        return information_scores(bank, estimate.theta)
    if config.criteria == "MFI_PRECISION":
        return precision_weighted_scores(bank, estimate)
    return constrained_scores(
        bank, state.administered, estimate, config.weights, state.ledger, config.group_targets
    )


def next_item(
    state: SessionState,
    config: StudyConfig,
    bank: ItemBank,
    now: float | None = None,
) -> str | StopDecision:
    """Choose the next item to administer, or decide to stop.

    Before `adaptive_start` responses have accumulated, a medium-difficulty
    warm-start rule (closest location to the prior mean, randomesque among
    the top five) runs instead of the configured criterion, and the
    Sympson-Hetter filter stays out of the way.
    """
    if state.phase is not Phase.RUNNING:
        raise SessionStateError(f"next_item requires a Running session, got {state.phase.value}")
    if state.outstanding_item is not None:
        raise SessionStateError(f"item {state.outstanding_item!r} is already outstanding")
    decision = stop_check(state, config)
    administered = set(state.administered)
    remaining = [item_id for item_id in bank.ids if item_id not in administered]
    if decision is None:
        decision = _pool_stop(state, config, remaining)
    if decision is not None:
        state.stop = decision
        return decision

    if len(state.responses) < config.adaptive_start:
        closeness = -np.array([abs(item.location - config.prior_mean) for item in bank.items])
        top = top_items(bank, closeness, remaining, WARM_START_POOL)
        item_id = top[int(state.rng.integers(len(top)))]
    else:
        estimate = current_estimate(state, config)
        scores = _criterion_scores(state, config, bank, estimate)
        if config.exposure_control:
            pool = list(remaining)
            first_choice = None
            item_id = None
            while pool:
                candidate = _pick(state, config, bank, scores, pool)
                if first_choice is None:
                    first_choice = candidate
                state.ledger.record_proposal(candidate)
                if sympson_hetter_filter(candidate, state.ledger, state.rng):
                    item_id = candidate
                    break
                pool.remove(candidate)
            if item_id is None:
                item_id = first_choice  # every candidate rejected: take the best anyway
        else:
            item_id = _pick(state, config, bank, scores, remaining)
    state.administered.append(item_id)
    state.last_activity = time.time() if now is None else now
    return item_id


def submit_response(
    state: SessionState,
    config: StudyConfig,
    bank: ItemBank,
    response: Response,
    now: float | None = None,
) -> AbilityEstimate:
    """Record the response to the outstanding item and re-estimate ability.

    The first `adaptive_start` responses are estimated with EAP regardless of
    the configured method (extreme early patterns have no finite MLE); after
    that the configured fallback chain runs on the full response set.
    """
    if state.phase is not Phase.RUNNING:
        raise SessionStateError(f"responses require a Running session, got {state.phase.value}")
    outstanding = state.outstanding_item
    if outstanding is None:
        raise SessionStateError("no item is outstanding")
    if response.item_id != outstanding:
        raise ResponseConflictError(
            f"response targets {response.item_id!r} but {outstanding!r} is outstanding"
        )
    item = bank.get(outstanding)
    if not 0 <= response.value < item.n_categories:
        raise ValueError(
            f"value {response.value} outside the {item.n_categories}-category range of {item.item_id!r}"
        )
    state.responses.append(response)
    record_administration(state.ledger, outstanding)
    items = [bank.get(r.item_id) for r in state.responses]
    estimate = estimate_for(config, items, state.responses)
    state.trajectory.append(estimate)
    state.last_activity = time.time() if now is None else now
    return estimate


def estimate_for(
    config: StudyConfig,
    items: Sequence[ItemParameters],
    responses: Sequence[Response],
) -> AbilityEstimate:
    """Dispatch to the configured estimator with the study's interim rule."""
    if len(responses) <= config.adaptive_start or config.estimation_method == "EAP":
        return estimate_eap(items, responses, config.prior)
    return fallback_chain(
        items, responses, config.estimation_method, config.alternate_method, config.prior
    )


def classify(theta: float, cutoffs: Sequence[CutoffBand] | None) -> str | None:
    """Label of the half-open band [lo, hi) containing theta."""
    if not cutoffs:
        return None
    for band in cutoffs:
        if band.lo <= theta < band.hi or (band.hi == np.inf and theta == np.inf):
            return band.label
    return None


def finalize(state: SessionState, config: StudyConfig, now: float | None = None) -> SessionResult:
    """Assemble the session result once a stop decision (or expiry) exists."""
    if state.phase is Phase.EXPIRED:
        disposition = "Expired"
    elif state.stop is not None:
        state.phase = Phase.FINISHED
        disposition = "Finished"
    else:
        raise SessionStateError("finalize called before a stop decision")
    now = time.time() if now is None else now
    final = current_estimate(state, config)
    records = tuple(
        ItemRecord(resp.item_id, resp.value, est.theta, est.se, est.method, resp.latency_ms)
        for resp, est in zip(state.responses, state.trajectory)
    )
    return SessionResult(
        session_id=state.session_id,
        final=final,
        n_items=len(state.responses),
        records=records,
        stop_reason=state.stop.reason if state.stop else None,
        disposition=disposition,
        duration_s=max(0.0, now - state.created_at),
        classification=classify(final.theta, config.cutoffs),
        demographics=state.demographics,
    )


def check_expiry(state: SessionState, config: StudyConfig, now: float | None = None) -> bool:
    """Expire a session idle beyond the configured timeout. Returns True if expired."""
    now = time.time() if now is None else now
    if state.phase in (Phase.CREATED, Phase.DEMOGRAPHICS, Phase.RUNNING):
        if now - state.last_activity > config.session_timeout_s:
            state.phase = Phase.EXPIRED
            return True
    return state.phase is Phase.EXPIRED


# ---------------------------------------------------------------------------
# Persistence: canonical snapshots, integrity tags, resume tokens, replay.


def _canonical(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def _tag(payload: str, key: bytes) -> str:
    return hashlib.sha256(key + payload.encode("utf-8")).hexdigest()


def snapshot_session(state: SessionState, key: bytes = b"catlab") -> str:
    """Serialize the full session state, RNG included, with an integrity tag."""
    doc = {
        "schema": SNAPSHOT_SCHEMA,
        "session_id": state.session_id,
        "phase": state.phase.value,
        "administered": list(state.administered),
        "responses": [
            {"item_id": r.item_id, "value": r.value, "latency_ms": r.latency_ms}
            for r in state.responses
        ],
        "trajectory": [
            {
                "theta": e.theta,
                "se": e.se,
                "method": e.method,
                "converged": e.converged,
                "iterations": e.iterations,
            }
            for e in state.trajectory
        ],
        "rng_state": state.rng.bit_generator.state,
        "seed": state.seed,
        "created_at": state.created_at,
        "last_activity": state.last_activity,
        "demographics": state.demographics,
        "stop": {"reason": state.stop.reason.value, "message": state.stop.message}
        if state.stop
        else None,
    }
    payload = _canonical(doc)
    return _canonical({"payload": doc, "tag": _tag(payload, key)})


def restore_session(
    snapshot: str,
    key: bytes = b"catlab",
    ledger: ExposureLedger | None = None,
) -> SessionState:
    """Rebuild a session bit-exactly from a snapshot, verifying integrity."""
    try:
        doc = json.loads(snapshot)
        payload = doc["payload"]
        tag = doc["tag"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise SessionStateError(f"malformed session snapshot: {exc}") from None
    if _tag(_canonical(payload), key) != tag:
        raise SessionStateError("session snapshot failed its integrity check")
    if payload.get("schema") != SNAPSHOT_SCHEMA:
        raise SessionStateError(f"unsupported snapshot schema {payload.get('schema')!r}")
    rng = np.random.default_rng()
    rng.bit_generator.state = payload["rng_state"]
    stop = payload.get("stop")
    return SessionState(
        session_id=payload["session_id"],
        phase=Phase(payload["phase"]),
        administered=list(payload["administered"]),
        responses=[
            Response(r["item_id"], r["value"], r.get("latency_ms")) for r in payload["responses"]
        ],
        trajectory=[
            AbilityEstimate(e["theta"], e["se"], e["method"], e["converged"], e["iterations"])
            for e in payload["trajectory"]
        ],
        ledger=ledger if ledger is not None else ExposureLedger(),
        rng=rng,
        seed=payload.get("seed"),
        created_at=payload["created_at"],
        last_activity=payload["last_activity"],
        demographics=payload.get("demographics"),
        stop=StopDecision(StopReason(stop["reason"]), stop.get("message", "")) if stop else None,
    )


def make_resume_token(session_id: str, key: bytes = b"catlab") -> str:
    return f"{session_id}.{_tag(session_id, key)[:32]}"


def verify_resume_token(token: str, key: bytes = b"catlab") -> str:
    """Return the session_id carried by a valid token; raise on tampering."""
    session_id, _, tag = token.partition(".")
    if not tag or _tag(session_id, key)[:32] != tag:
        raise SessionStateError("invalid resume token")
    return session_id


def administer_scripted(state: SessionState, bank: ItemBank, item_id: str) -> str:
    """Force a specific item to be the outstanding one (event-log replay)."""
    if state.phase is not Phase.RUNNING:
        raise SessionStateError(f"scripted administration requires Running, got {state.phase.value}")
    if state.outstanding_item is not None:
        raise SessionStateError("an item is already outstanding")
    if item_id not in bank:
        raise SessionStateError(f"unknown item {item_id!r}")
    if item_id in state.administered:
        raise SessionStateError(f"item {item_id!r} was already administered")
    state.administered.append(item_id)
    return item_id


def replay_session(
    config: StudyConfig,
    bank: ItemBank,
    values: Sequence[int],
    *,
    seed,
    session_id: str = "replay",
    ledger: ExposureLedger | None = None,
    created_at: float = 0.0,
    finished_at: float = 0.0,
) -> tuple[SessionResult, SessionState]:
    """Re-run a full session, feeding recorded response values in order."""
    state = start_session(
        config, bank, ledger=ledger, seed=seed, session_id=session_id, now=created_at
    )
    begin_session(state, config, now=created_at)
    cursor = 0
    while True:
        step = next_item(state, config, bank, now=created_at)
        if isinstance(step, StopDecision):
            break
        if cursor >= len(values):
            raise SessionStateError("response script ended before the session stopped")
        submit_response(state, config, bank, Response(step, values[cursor]), now=created_at)
        cursor += 1
    return finalize(state, config, now=finished_at), state


def replay_from_log(
    config: StudyConfig,
    bank: ItemBank,
    pairs: Sequence[tuple[str, int]],
    *,
    session_id: str,
    seed,
    created_at: float,
    finished_at: float,
    latencies: Sequence[int | None] | None = None,
) -> SessionResult:
    """Reproduce a session's result from its logged (item_id, value) events.

    Selection is bypassed (the log already fixes the item sequence); the
    estimation trajectory and result assembly are recomputed and must land on
    the same bytes as the original run.
    """
    state = start_session(config, bank, seed=seed, session_id=session_id, now=created_at)
    begin_session(state, config, now=created_at)
    for position, (item_id, value) in enumerate(pairs):
        decision = stop_check(state, config)
        if decision is not None:
            raise SessionStateError(f"log continues past the stop decision at step {position}")
        administer_scripted(state, bank, item_id)
        latency = latencies[position] if latencies else None
        submit_response(state, config, bank, Response(item_id, value, latency), now=created_at)
    decision = stop_check(state, config)
    if decision is None:
        remaining = [i for i in bank.ids if i not in set(state.administered)]
        decision = _pool_stop(state, config, remaining)
    if decision is None:
        raise SessionStateError("log ended before any stopping rule fired")
    state.stop = decision
    return finalize(state, config, now=finished_at)


# ---------------------------------------------------------------------------
# Config documents (the json shape used by the service and the sim CLI).


def _band_from_doc(label: str, bounds) -> CutoffBand:
    lo, hi = bounds
    lo = -np.inf if lo is None else float(lo)
    hi = np.inf if hi is None else float(hi)
    return CutoffBand(str(label), lo, hi)


_CONFIG_KEYS = {
    "name", "model", "max_items", "min_items", "min_sem", "estimation_method",
    "alternate_method", "criteria", "adaptive_start", "exposure_control",
    "exposure_target", "weights", "group_targets", "cutoffs", "demographics",
    "session_save", "results_webhook", "seed", "language", "prior_mean",
    "prior_sd", "tie_breaking", "expose_running_se", "expose_running_theta",
    "session_timeout_s",
}


def config_from_dict(doc: Mapping) -> StudyConfig:
    """Build a StudyConfig from its json document form.

    Raises ValueError on unknown keys or malformed values; use
    validate_config afterwards for the semantic checks.
    """
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for key in ("name", "model", "max_items", "min_items", "min_sem"):
        if key not in doc:
            raise ValueError(f"config is missing required key {key!r}")
    kwargs: dict = {
        key: doc[key]
        for key in _CONFIG_KEYS
        if key in doc and key not in ("weights", "cutoffs", "demographics", "group_targets")
    }
    kwargs["max_items"] = int(doc["max_items"])
    kwargs["min_items"] = int(doc["min_items"])
    kwargs["min_sem"] = float(doc["min_sem"])
    if "weights" in doc:
        w = dict(doc["weights"])
        external = w.pop("external_scores", None)
        kwargs["weights"] = SelectionWeights(external_scores=external, **w)
    if doc.get("cutoffs"):
        raw = doc["cutoffs"]
        if isinstance(raw, Mapping):
            bands = [_band_from_doc(label, bounds) for label, bounds in raw.items()]
        else:
            bands = [_band_from_doc(entry[0], entry[1:]) for entry in raw]
        kwargs["cutoffs"] = tuple(sorted(bands, key=lambda band: band.lo))
    if doc.get("demographics"):
        fields = []
        for entry in doc["demographics"]:
            if isinstance(entry, str):
                fields.append(DemographicField(entry))
            else:
                fields.append(
                    DemographicField(
                        entry["name"], entry.get("kind", "text"), entry.get("required", True)
                    )
                )
        kwargs["demographics"] = tuple(fields)
    if doc.get("group_targets"):
        kwargs["group_targets"] = {str(k): float(v) for k, v in doc["group_targets"].items()}
    return StudyConfig(**kwargs)


def config_to_dict(config: StudyConfig) -> dict:
    """Json-safe document form of a StudyConfig (infinities become null)."""
    doc: dict = {
        "name": config.name,
        "model": config.model,
        "max_items": config.max_items,
        "min_items": config.min_items,
        "min_sem": config.min_sem,
        "estimation_method": config.estimation_method,
        "alternate_method": config.alternate_method,
        "criteria": config.criteria,
        "adaptive_start": config.adaptive_start,
        "exposure_control": config.exposure_control,
        "exposure_target": config.exposure_target
        if not isinstance(config.exposure_target, Mapping)
        else dict(config.exposure_target),
        "weights": {
            "alpha": config.weights.alpha,
            "beta": config.weights.beta,
            "gamma": config.weights.gamma,
            "delta": config.weights.delta,
            "external_scores": dict(config.weights.external_scores)
            if config.weights.external_scores
            else None,
        },
        "group_targets": config.group_targets,
        "cutoffs": [
            [
                band.label,
                None if band.lo == -np.inf else band.lo,
                None if band.hi == np.inf else band.hi,
            ]
            for band in config.cutoffs
        ]
        if config.cutoffs
        else None,
        "demographics": [
            {"name": f.name, "kind": f.kind, "required": f.required} for f in config.demographics
        ],
        "session_save": config.session_save,
        "results_webhook": config.results_webhook,
        "seed": config.seed,
        "language": config.language,
        "prior_mean": config.prior_mean,
        "prior_sd": config.prior_sd,
        "tie_breaking": config.tie_breaking,
        "expose_running_se": config.expose_running_se,
        "expose_running_theta": config.expose_running_theta,
        "session_timeout_s": config.session_timeout_s,
    }
    return doc
