"""Network-facing session service: live administration over HTTP, event-log
persistence, demographics capture, and the outbound results webhook.

Per-session operations are serialized behind a session lock, so concurrent
duplicate responses resolve to exactly one accepted submission and one
conflict. Webhook deliveries run on daemon threads and never block or alter
session results. With a persistence directory configured, every session
writes an append-only event log plus a snapshot per step; finished results
are stored as canonical bytes and served verbatim.
"""

from __future__ import annotations

import argparse
import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import httpx
from fastapi import Body, FastAPI, Header, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import Response as HttpResponse

from . import engine
from .bank import ItemBank, load_bank, load_bank_file
from .engine import (
    Phase,
    SessionResult,
    SessionState,
    StopDecision,
    StudyConfig,
    config_from_dict,
    config_to_dict,
    validate_config,
    validate_demographics,
)
from .errors import BankFormatError, ResponseConflictError, SessionStateError
from .irt import Response
from .selection import ExposureLedger


@dataclass
class Settings:
    host: str = "127.0.0.1"
    port: int = 8000
    persist_dir: Path | None = None
    operator_token: str | None = None
    secret_key: bytes = b"catlab"
    webhook_retries: int = 5
    webhook_backoff_s: float = 0.5
    webhook_timeout_s: float = 5.0
    cors_origins: tuple[str, ...] = ("*",)  # the browser client is cross-origin

    @classmethod
    def from_env(cls, env: Mapping[str, str] | None = None) -> "Settings":
        env = os.environ if env is None else env
        persist = env.get("CATLAB_PERSIST_DIR")
        return cls(
            host=env.get("CATLAB_HOST", "127.0.0.1"),
            port=int(env.get("CATLAB_PORT", "8000")),
            persist_dir=Path(persist) if persist else None,
            operator_token=env.get("CATLAB_OPERATOR_TOKEN"),
            secret_key=env.get("CATLAB_SECRET", "catlab").encode("utf-8"),
            webhook_retries=int(env.get("CATLAB_WEBHOOK_RETRIES", "5")),
            webhook_backoff_s=float(env.get("CATLAB_WEBHOOK_BACKOFF_S", "0.5")),
            cors_origins=tuple(env.get("CATLAB_CORS_ORIGINS", "*").split(",")),
        )


@dataclass
class WebhookDelivery:
    target: str
    payload: dict
    attempts: int = 0
    status: str = "pending"  # pending | delivered | failed
    error: str | None = None


def webhook_payload(result: SessionResult, study_id: str) -> dict:
    """The exported field set: ability estimate, precision, length, timing."""
    return {
        "session_id": result.session_id,
        "participant_id": result.session_id,
        "study_id": study_id,
        "theta_estimate": result.final.theta,
        "se_estimate": result.final.se,
        "items_administered": result.n_items,
        "completion_time": result.duration_s,
        "stop_reason": result.stop_reason.value if result.stop_reason else None,
        "classification": result.classification,
    }


def deliver_webhook(
    payload: dict,
    target: str,
    *,
    retries: int = 5,
    backoff_s: float = 0.5,
    timeout_s: float = 5.0,
    transport: Callable[[str, dict], int] | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> WebhookDelivery:
    """Post the payload with exponential backoff.

    Network errors and 5xx responses are retried up to `retries` attempts;
    a 4xx response is a terminal rejection. The delivery record is returned
    either way and never raises.
    """
    if transport is None:
        def transport(url: str, body: dict) -> int:
            return httpx.post(url, json=body, timeout=timeout_s).status_code

    delivery = WebhookDelivery(target=target, payload=payload)
    while delivery.attempts < max(1, retries):
        delivery.attempts += 1
        try:
            status = transport(target, payload)
        except Exception as exc:  # noqa: BLE001 - any transport failure is retryable
            delivery.error = str(exc)
            status = None
        if status is not None and 200 <= status < 300:
            delivery.status = "delivered"
            delivery.error = None
            return delivery
        if status is not None and 400 <= status < 500:
            delivery.status = "failed"
            delivery.error = f"rejected with status {status}"
            return delivery
        if status is not None:
            delivery.error = f"status {status}"
        if delivery.attempts < max(1, retries):
            sleep(backoff_s * (2 ** (delivery.attempts - 1)))
    delivery.status = "failed"
    return delivery


class SessionStore:
    """Directory-backed persistence: studies, event logs, snapshots, results.

    Exposure-ledger counts are deliberately not persisted; exposure control is
    statistical and restarts rebuild it from zero.
    """

    def __init__(self, root: Path) -> None:
        self.root = Path(root)
        (self.root / "studies").mkdir(parents=True, exist_ok=True)
        (self.root / "sessions").mkdir(parents=True, exist_ok=True)

    def _session_path(self, session_id: str, suffix: str) -> Path:
        return self.root / "sessions" / f"{session_id}.{suffix}"

    def save_study(self, study_id: str, doc: dict) -> None:
        path = self.root / "studies" / f"{study_id}.json"
        path.write_text(json.dumps(doc))

    def load_study(self, study_id: str) -> dict | None:
        path = self.root / "studies" / f"{study_id}.json"
        return json.loads(path.read_text()) if path.exists() else None

    def append_event(self, session_id: str, event: dict) -> None:
        with self._session_path(session_id, "events.jsonl").open("a") as handle:
            handle.write(json.dumps(event, sort_keys=True) + "\n")

    def events(self, session_id: str) -> list[dict]:
        path = self._session_path(session_id, "events.jsonl")
        if not path.exists():
            return []
        return [json.loads(line) for line in path.read_text().splitlines() if line]

    def save_snapshot(self, session_id: str, snapshot: str) -> None:
        path = self._session_path(session_id, "snapshot.json")
        tmp = path.with_suffix(".tmp")
        tmp.write_text(snapshot)
        tmp.replace(path)

    def load_snapshot(self, session_id: str) -> str | None:
        path = self._session_path(session_id, "snapshot.json")
        return path.read_text() if path.exists() else None

    def save_result(self, session_id: str, data: bytes) -> None:
        self._session_path(session_id, "result.json").write_bytes(data)

    def load_result(self, session_id: str) -> bytes | None:
        path = self._session_path(session_id, "result.json")
        return path.read_bytes() if path.exists() else None


@dataclass
class Study:
    study_id: str
    config: StudyConfig
    bank: ItemBank
    ledger: ExposureLedger
    seed_base: int
    sessions_created: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)


@dataclass
class SessionRuntime:
    session_id: str
    study_id: str
    state: SessionState | None
    result_bytes: bytes | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


def render_result(result: SessionResult, study_id: str) -> bytes:
    """Canonical result document; identical content yields identical bytes."""
    doc = {
        "session_id": result.session_id,
        "study_id": study_id,
        "disposition": result.disposition,
        "stop_reason": result.stop_reason.value if result.stop_reason else None,
        "theta": result.final.theta,
        "se": result.final.se,
        "method": result.final.method,
        "n_items": result.n_items,
        "classification": result.classification,
        "duration_s": result.duration_s,
        "demographics": result.demographics,
        "records": [
            {
                "item_id": record.item_id,
                "value": record.value,
                "theta": record.theta,
                "se": record.se,
                "method": record.method,
                "latency_ms": record.latency_ms,
            }
            for record in result.records
        ],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _error(status: int, code: str, **extra) -> HTTPException:
    return HTTPException(status_code=status, detail={"code": code, **extra})


def create_app(settings: Settings | None = None) -> FastAPI:
    settings = settings or Settings()
    app = FastAPI(title="catlab session service")
    if settings.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(settings.cors_origins),
            allow_methods=["*"],
            allow_headers=["*"],
        )
    store = SessionStore(settings.persist_dir) if settings.persist_dir else None
    studies: dict[str, Study] = {}
    sessions: dict[str, SessionRuntime] = {}
    registry_lock = threading.Lock()
    deliveries: dict[str, WebhookDelivery] = {}
    app.state.deliveries = deliveries
    app.state.settings = settings

    def _persist_state(runtime: SessionRuntime) -> None:
        if store and runtime.state is not None:
            store.save_snapshot(
                runtime.session_id, engine.snapshot_session(runtime.state, settings.secret_key)
            )

    def _log(runtime: SessionRuntime, event_type: str, **fields) -> None:
        if store:
            store.append_event(runtime.session_id, {"type": event_type, **fields})

    def _require_operator(authorization: str | None) -> None:
        if settings.operator_token is None:
            return
        if authorization != f"Bearer {settings.operator_token}":
            raise _error(401, "unauthorized")

    def _get_study(study_id: str) -> Study:
        with registry_lock:
            study = studies.get(study_id)
        if study is not None:
            return study
        if store:
            doc = store.load_study(study_id)
            if doc is not None:
                config = config_from_dict(doc["config"])
                bank = load_bank(json.dumps(doc["bank"]), format="json")
                target = config.exposure_target if config.exposure_control else 1.0
                study = Study(
                    study_id=study_id,
                    config=config,
                    bank=bank,
                    ledger=ExposureLedger.for_bank(bank, target),
                    seed_base=doc["seed_base"],
                    sessions_created=doc.get("sessions_created", 0),
                )
                with registry_lock:
                    study = studies.setdefault(study_id, study)
                return study
        raise _error(404, "unknown_study", study_id=study_id)

    def _get_runtime(session_id: str) -> SessionRuntime:
        with registry_lock:
            runtime = sessions.get(session_id)
        if runtime is not None:
            return runtime
        if store:
            result = store.load_result(session_id)
            events = store.events(session_id)
            study_id = events[0]["study_id"] if events else None
            if result is not None and study_id:
                runtime = SessionRuntime(session_id, study_id, state=None, result_bytes=result)
                with registry_lock:
                    runtime = sessions.setdefault(session_id, runtime)
                return runtime
            snapshot = store.load_snapshot(session_id)
            if snapshot is not None and study_id:
                study = _get_study(study_id)
                state = engine.restore_session(snapshot, settings.secret_key, ledger=study.ledger)
                runtime = SessionRuntime(session_id, study_id, state=state)
                with registry_lock:
                    runtime = sessions.setdefault(session_id, runtime)
                return runtime
        raise _error(404, "unknown_session", session_id=session_id)

    def _item_view(study: Study, state: SessionState, item_id: str) -> dict:
        item = study.bank.get(item_id)
        return {
            "item_id": item.item_id,
            "prompt": item.text or item.item_id,
            "categories": item.n_categories,
            "labels": list(item.labels) if item.labels else None,
            "position": len(state.responses) + 1,
            "max_items": study.config.max_items,
            "progress": len(state.responses) / study.config.max_items,
            "language": study.config.language,
        }

    def _demographics_form(study: Study) -> dict:
        return {
            "kind": "demographics",
            "fields": [
                {"name": f.name, "kind": f.kind, "required": f.required}
                for f in study.config.demographics
            ],
        }

    def _finish(study: Study, runtime: SessionRuntime) -> None:
        finished = time.time()
        result = engine.finalize(runtime.state, study.config, now=finished)
        runtime.result_bytes = render_result(result, study.study_id)
        _log(
            runtime,
            "stop",
            reason=result.stop_reason.value if result.stop_reason else None,
            ts=finished,
        )
        _persist_state(runtime)
        if store:
            store.save_result(runtime.session_id, runtime.result_bytes)
        if study.config.results_webhook:
            payload = webhook_payload(result, study.study_id)
            delivery = WebhookDelivery(target=study.config.results_webhook, payload=payload)
            deliveries[runtime.session_id] = delivery

            def _deliver() -> None:
                done = deliver_webhook(
                    payload,
                    study.config.results_webhook,
                    retries=settings.webhook_retries,
                    backoff_s=settings.webhook_backoff_s,
                    timeout_s=settings.webhook_timeout_s,
                )
                delivery.attempts = done.attempts
                delivery.status = done.status
                delivery.error = done.error

            threading.Thread(target=_deliver, daemon=True).start()

    def _advance(study: Study, runtime: SessionRuntime) -> dict:
        """Issue the next step: the outstanding item, a fresh item, or the result."""
        state = runtime.state
        if state.outstanding_item is not None:
            return {"kind": "item", "item": _item_view(study, state, state.outstanding_item)}
        step = engine.next_item(state, study.config, study.bank)
        if isinstance(step, StopDecision):
            _finish(study, runtime)
            return {"kind": "result", "url": f"/sessions/{runtime.session_id}/result"}
        _log(runtime, "item", item_id=step)
        _persist_state(runtime)
        return {"kind": "item", "item": _item_view(study, state, step)}

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.post("/studies", status_code=201)
    def create_study(
        payload: dict = Body(...), authorization: str | None = Header(default=None)
    ) -> dict:
        _require_operator(authorization)
        try:
            config = config_from_dict(payload.get("config") or {})
        except (ValueError, TypeError, KeyError) as exc:
            raise _error(400, "invalid_config", violations=[str(exc)])
        if "bank" in payload:
            try:
                bank = load_bank(json.dumps(payload["bank"]), format="json")
            except BankFormatError as exc:
                raise _error(400, "invalid_bank", violations=[str(exc)])
        elif "bank_ref" in payload:
            path = Path(payload["bank_ref"])
            if not path.exists():
                raise _error(400, "unknown_bank", bank_ref=payload["bank_ref"])
            try:
                bank = load_bank_file(path)
            except BankFormatError as exc:
                raise _error(400, "invalid_bank", violations=[str(exc)])
        else:
            raise _error(400, "invalid_bank", violations=["payload needs bank or bank_ref"])
        violations = validate_config(config, bank)
        if violations:
            raise _error(400, "invalid_config", violations=violations)
        study_id = "st-" + uuid.uuid4().hex[:12]
        seed_base = config.seed if config.seed is not None else int.from_bytes(os.urandom(6), "big")
        target = config.exposure_target if config.exposure_control else 1.0
        study = Study(
            study_id=study_id,
            config=config,
            bank=bank,
            ledger=ExposureLedger.for_bank(bank, target),
            seed_base=seed_base,
        )
        with registry_lock:
            studies[study_id] = study
        if store:
            store.save_study(
                study_id,
                {
                    "config": config_to_dict(config),
                    "bank": json.loads(load_bank_to_doc(bank)),
                    "seed_base": seed_base,
                },
            )
        return {"study_id": study_id}

    @app.post("/studies/{study_id}/sessions", status_code=201)
    def create_session(study_id: str, payload: dict | None = Body(default=None)) -> dict:
        study = _get_study(study_id)
        payload = payload or {}
        demographics = payload.get("demographics")
        if study.config.demographics and demographics:
            problems = validate_demographics(study.config, demographics)
            if problems:
                raise _error(400, "invalid_demographics", violations=problems)
        with study.lock:
            study.sessions_created += 1
            counter = study.sessions_created
        state = engine.start_session(
            study.config,
            study.bank,
            ledger=study.ledger,
            seed=(study.seed_base, counter),
            session_id="se-" + uuid.uuid4().hex[:16],
        )
        runtime = SessionRuntime(state.session_id, study_id, state=state)
        with registry_lock:
            sessions[state.session_id] = runtime
        _log(
            runtime,
            "created",
            study_id=study_id,
            seed=[study.seed_base, counter],
            ts=state.created_at,
        )
        if study.config.demographics and not demographics:
            _persist_state(runtime)
            step = _demographics_form(study)
        else:
            engine.begin_session(state, study.config, demographics)
            if demographics:
                _log(runtime, "demographics", payload=dict(demographics))
            with runtime.lock:
                step = _advance(study, runtime)
        return {
            "session_id": state.session_id,
            "token": engine.make_resume_token(state.session_id, settings.secret_key),
            "step": step,
        }

    def _check_expired(study: Study, runtime: SessionRuntime) -> None:
        state = runtime.state
        if state is not None and engine.check_expiry(state, study.config):
            _persist_state(runtime)

    @app.get("/sessions/{session_id}/next")
    def get_next(session_id: str) -> dict:
        runtime = _get_runtime(session_id)
        if runtime.state is None or runtime.state.phase is Phase.FINISHED or runtime.result_bytes:
            return {"kind": "result", "url": f"/sessions/{session_id}/result"}
        study = _get_study(runtime.study_id)
        with runtime.lock:
            _check_expired(study, runtime)
            state = runtime.state
            if state.phase is Phase.EXPIRED:
                raise _error(410, "expired_session", session_id=session_id)
            if state.phase is Phase.DEMOGRAPHICS:
                return _demographics_form(study)
            return _advance(study, runtime)

    @app.post("/sessions/{session_id}/responses")
    def post_response(session_id: str, payload: dict = Body(...)) -> dict:
        runtime = _get_runtime(session_id)
        study = _get_study(runtime.study_id)
        with runtime.lock:
            state = runtime.state
            if state is None or state.phase is Phase.FINISHED:
                raise _error(409, "session_finished", result=f"/sessions/{session_id}/result")
            _check_expired(study, runtime)
            if state.phase is Phase.EXPIRED:
                raise _error(410, "expired_session", session_id=session_id)
            if state.phase is Phase.DEMOGRAPHICS:
                problems = validate_demographics(study.config, payload.get("demographics"))
                if problems:
                    raise _error(400, "invalid_demographics", violations=problems)
                engine.begin_session(state, study.config, payload.get("demographics"))
                _log(runtime, "demographics", payload=dict(payload.get("demographics") or {}))
                step = _advance(study, runtime)
                return {"items_completed": 0, "progress": 0.0, "completed": False, "next": step}
            if "item_id" not in payload or "value" not in payload:
                raise _error(400, "invalid_response", violations=["item_id and value are required"])
            response = Response(
                str(payload["item_id"]), int(payload["value"]), payload.get("latency_ms")
            )
            try:
                estimate = engine.submit_response(state, study.config, study.bank, response)
            except ResponseConflictError:
                outstanding = state.outstanding_item
                raise _error(
                    409,
                    "conflict",
                    outstanding=_item_view(study, state, outstanding) if outstanding else None,
                )
            except SessionStateError as exc:
                outstanding = state.outstanding_item
                raise _error(
                    409,
                    "conflict",
                    detail=str(exc),
                    outstanding=_item_view(study, state, outstanding) if outstanding else None,
                )
            except ValueError as exc:
                raise _error(400, "invalid_response", violations=[str(exc)])
            _log(
                runtime,
                "response",
                item_id=response.item_id,
                value=response.value,
                latency_ms=response.latency_ms,
            )
            _log(
                runtime,
                "estimate",
                theta=estimate.theta,
                se=estimate.se,
                method=estimate.method,
            )
            step = _advance(study, runtime)
            snapshot = {
                "items_completed": len(state.responses),
                "progress": len(state.responses) / study.config.max_items,
                "completed": step["kind"] == "result",
                "next": step,
            }
            if study.config.expose_running_se:
                snapshot["se"] = estimate.se
            if study.config.expose_running_theta:
                snapshot["theta"] = estimate.theta
            return snapshot

    @app.get("/sessions/{session_id}/result")
    def get_result(session_id: str) -> HttpResponse:
        runtime = _get_runtime(session_id)
        if runtime.result_bytes is not None:
            return HttpResponse(content=runtime.result_bytes, media_type="application/json")
        study = _get_study(runtime.study_id)
        with runtime.lock:
            if runtime.result_bytes is not None:
                return HttpResponse(content=runtime.result_bytes, media_type="application/json")
            state = runtime.state
            _check_expired(study, runtime)
            if state.phase is Phase.EXPIRED:
                result = engine.finalize(state, study.config)
                runtime.result_bytes = render_result(result, study.study_id)
                if store:
                    store.save_result(session_id, runtime.result_bytes)
                return HttpResponse(content=runtime.result_bytes, media_type="application/json")
            raise _error(409, "session_running", session_id=session_id)

    return app


def load_bank_to_doc(bank: ItemBank) -> str:
    from .bank import serialize_bank

    return serialize_bank(bank, format="json")


def main(argv=None) -> int:
    import uvicorn

    defaults = Settings.from_env()
    parser = argparse.ArgumentParser(prog="catlab-service", description="adaptive testing session service")
    parser.add_argument("--host", default=defaults.host)
    parser.add_argument("--port", type=int, default=defaults.port)
    parser.add_argument("--persist-dir", default=str(defaults.persist_dir) if defaults.persist_dir else None)
    parser.add_argument("--operator-token", default=defaults.operator_token)
    parser.add_argument("--webhook-retries", type=int, default=defaults.webhook_retries)
    args = parser.parse_args(argv)
    settings = Settings(
        host=args.host,
        port=args.port,
        persist_dir=Path(args.persist_dir) if args.persist_dir else None,
        operator_token=args.operator_token,
        secret_key=defaults.secret_key,
        webhook_retries=args.webhook_retries,
        webhook_backoff_s=defaults.webhook_backoff_s,
    )
    uvicorn.run(create_app(settings), host=settings.host, port=settings.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
