"""HTTP service for interactive sessions.

Each created session runs its flow engine in a worker thread. When the engine
needs answers or a verdict it parks in a waiting state that is visible in the
state summary and on the server-sent event stream; the next matching POST
supplies the input and wakes it. Inputs posted in any other state are
rejected without touching the session.
"""

from __future__ import annotations

import asyncio
import json
import queue
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Literal

from fastapi import FastAPI, HTTPException, Request
from fastapi.encoders import jsonable_encoder
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse, Response, StreamingResponse
from pydantic import BaseModel

from . import events as ev
from .artifacts import run_session
from .diagram import BlockGraph, render_svg_bytes, to_dot
from .errors import DaqSynthError, SessionNotFoundError
from .events import EventLog
from .flow import (
    FeedbackVerdict,
    SessionConfigs,
    Stage,
    VerdictRequest,
    accept,
    new_session_id,
    revise,
)
from .gateway import Backend, LiveBackend, ModelConfig, designer_config, load_script
from .prompts import PromptCatalog, default_catalog
from .store import SessionStore

DEMO_SCRIPT = Path(__file__).parent / "data" / "demo_script.jsonl"


@dataclass
class ServiceSettings:
    store_dir: Path
    backend: str = "scripted"  # never "live" unless explicitly configured
    script_path: Path | None = None
    designer: ModelConfig = field(default_factory=designer_config)
    template_pack: Path | None = None

    def make_backend(self) -> Backend:
        if self.backend == "live":
            return LiveBackend()
        return load_script(self.script_path or DEMO_SCRIPT)


class CreateSessionRequest(BaseModel):
    description: str
    mode: str = "interactive"


class CreateSessionResponse(BaseModel):
    id: str


class SessionSummary(BaseModel):
    stage: str
    waiting: Literal["none", "answers", "verdict"]
    questions: list[str] | None = None
    artifact_kind: str | None = None
    content_ref: str | None = None
    failed: bool = False
    failure_reason: str | None = None


class AnswersRequest(BaseModel):
    answers: list[str]


class FeedbackRequest(BaseModel):
    kind: Literal["accept", "revise"]
    text: str = ""


class _LiveSession:
    """Bridge between one engine thread and the HTTP handlers."""

    def __init__(self, session_id: str, description: str):
        self.id = session_id
        self.description = description
        self.lock = threading.Lock()
        self.waiting: str = "none"
        self.questions: list[str] | None = None
        self.pending_kind: str | None = None
        self.pending_content: str | None = None
        self.stage: str = Stage.ARCHITECTURAL.value
        self.failed = False
        self.failure_reason: str | None = None
        self.finished = False
        self.latest_graph: BlockGraph | None = None
        self.latest_summary: str | None = None
        self.answers_queue: "queue.Queue[list[str]]" = queue.Queue()
        self.feedback_queue: "queue.Queue[FeedbackVerdict]" = queue.Queue()
        self.history: list[tuple[str, dict]] = []
        self.subscribers: list["queue.Queue[tuple[str, dict]]"] = []

    # --- event fan-out -----------------------------------------------------

    def broadcast(self, name: str, payload: dict) -> None:
        with self.lock:
            self.history.append((name, payload))
            for sub in self.subscribers:
                sub.put((name, payload))

    def subscribe(self) -> tuple[list[tuple[str, dict]], "queue.Queue[tuple[str, dict]]"]:
        sub: "queue.Queue[tuple[str, dict]]" = queue.Queue()
        with self.lock:
            snapshot = list(self.history)
            self.subscribers.append(sub)
        return snapshot, sub

    def unsubscribe(self, sub: "queue.Queue[tuple[str, dict]]") -> None:
        with self.lock:
            if sub in self.subscribers:
                self.subscribers.remove(sub)

    # --- flow-event mapping --------------------------------------------------

    def handle_flow_event(self, event: dict) -> None:
        kind = event.get("event")
        if kind == ev.EV_STAGE_ADVANCED:
            with self.lock:
                self.stage = event["stage"]
            self.broadcast("stage_changed", {"stage": event["stage"]})
        elif kind == ev.EV_ARCHITECTURE_ACCEPTED:
            self.broadcast(
                "artifact",
                {"kind": "architecture", "path": f"/api/sessions/{self.id}/diagram.dot"},
            )
        elif kind == ev.EV_DETAIL_STORED:
            self.broadcast(
                "artifact",
                {"kind": "detail", "block": event["block"], "content": event["text"]},
            )
        elif kind == ev.EV_SUMMARY_STORED:
            with self.lock:
                self.latest_summary = event["text"]
            self.broadcast(
                "artifact",
                {"kind": "summary", "path": f"/api/sessions/{self.id}/summary"},
            )
        elif kind == ev.EV_SESSION_DONE:
            with self.lock:
                self.finished = True
            self.broadcast("done", {})
        elif kind == ev.EV_SESSION_FAILED:
            with self.lock:
                self.failed = True
                self.failure_reason = event["reason"]
                self.finished = True
            self.broadcast("failed", {"reason": event["reason"]})

    # --- client-port bridge ----------------------------------------------------

    def await_answers(self, questions: list[str]) -> list[str]:
        with self.lock:
            self.waiting = "answers"
            self.questions = list(questions)
        self.broadcast("waiting_for_answers", {"questions": list(questions)})
        answers = self.answers_queue.get()
        with self.lock:
            self.waiting = "none"
            self.questions = None
        return answers

    def await_verdict(self, request: VerdictRequest) -> FeedbackVerdict:
        content_ref = f"/api/sessions/{self.id}/artifacts/pending"
        with self.lock:
            self.waiting = "verdict"
            self.pending_kind = request.kind
            self.pending_content = request.content
            if request.kind == "architecture" and request.graph is not None:
                self.latest_graph = request.graph
                content_ref = f"/api/sessions/{self.id}/diagram.dot"
            elif request.kind == "summary":
                self.latest_summary = request.content
                content_ref = f"/api/sessions/{self.id}/summary"
        self.broadcast(
            "waiting_for_verdict",
            {"kind": request.kind, "content_ref": content_ref, "content": request.content},
        )
        verdict = self.feedback_queue.get()
        with self.lock:
            self.waiting = "none"
            self.pending_kind = None
            self.pending_content = None
        return verdict

    def summary_model(self) -> SessionSummary:
        with self.lock:
            content_ref = None
            if self.waiting == "verdict":
                if self.pending_kind == "architecture":
                    content_ref = f"/api/sessions/{self.id}/diagram.dot"
                elif self.pending_kind == "summary":
                    content_ref = f"/api/sessions/{self.id}/summary"
                else:
                    content_ref = f"/api/sessions/{self.id}/artifacts/pending"
            return SessionSummary(
                stage=self.stage,
                waiting=self.waiting,  # type: ignore[arg-type]
                questions=list(self.questions) if self.questions is not None else None,
                artifact_kind=self.pending_kind,
                content_ref=content_ref,
                failed=self.failed,
                failure_reason=self.failure_reason,
            )


class _ApiPort:
    def __init__(self, live: _LiveSession):
        self._live = live

    def answer_questions(self, questions: list[str]) -> list[str]:
        return self._live.await_answers(questions)

    def give_verdict(self, request: VerdictRequest) -> FeedbackVerdict:
        return self._live.await_verdict(request)


def _error(status: int, code: str) -> HTTPException:
    return HTTPException(status_code=status, detail={"error": code})


def create_app(settings: ServiceSettings) -> FastAPI:
    app = FastAPI(title="daqsynth", version="0.1.0")
    store = SessionStore(settings.store_dir)
    catalog: PromptCatalog = (
        PromptCatalog.load(settings.template_pack) if settings.template_pack else default_catalog()
    )
    registry: dict[str, _LiveSession] = {}
    registry_lock = threading.Lock()

    @app.exception_handler(RequestValidationError)
    async def _validation_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"error": "invalid_body", "detail": jsonable_encoder(exc.errors())},
        )

    def _engine(live: _LiveSession) -> None:
        log = EventLog()
        log.add_sink(store.sink(live.id))
        log.add_sink(live.handle_flow_event)
        try:
            run_session(
                live.description,
                _ApiPort(live),
                SessionConfigs(designer=settings.designer),
                settings.make_backend(),
                session_id=live.id,
                catalog=catalog,
                log=log,
                continue_on_block_failure=False,
            )
        except Exception as exc:  # engine threads must never die silently
            if not live.finished:
                live.failed = True
                live.failure_reason = str(exc)
                live.finished = True
                live.broadcast("failed", {"reason": str(exc)})

    def _live(session_id: str) -> _LiveSession:
        with registry_lock:
            live = registry.get(session_id)
        if live is None:
            raise _error(404, "not_found")
        return live

    @app.post("/api/sessions", response_model=CreateSessionResponse, status_code=201)
    def create_session(body: CreateSessionRequest):
        if not body.description.strip():
            raise _error(400, "empty_description")
        if body.mode != "interactive":
            raise _error(400, "unsupported_mode")
        session_id = new_session_id()
        live = _LiveSession(session_id, body.description)
        with registry_lock:
            registry[session_id] = live
        threading.Thread(target=_engine, args=(live,), daemon=True, name=f"engine-{session_id}").start()
        return CreateSessionResponse(id=session_id)

    @app.get("/api/sessions/{session_id}", response_model=SessionSummary)
    def session_summary(session_id: str):
        with registry_lock:
            live = registry.get(session_id)
        if live is not None:
            return live.summary_model()
        try:
            state = store.load_session(session_id)
        except (SessionNotFoundError, DaqSynthError):
            raise _error(404, "not_found") from None
        return SessionSummary(
            stage=state.stage.value,
            waiting="none",
            failed=state.failed,
            failure_reason=state.failure_reason,
        )

    @app.get("/api/sessions/{session_id}/events")
    async def session_events(session_id: str):
        live = _live(session_id)
        snapshot, sub = live.subscribe()

        def encode(name: str, payload: dict) -> str:
            return f"event: {name}\ndata: {json.dumps(payload, ensure_ascii=False)}\n\n"

        async def stream() -> Iterator[str]:  # type: ignore[misc]
            try:
                terminal = False
                for name, payload in snapshot:
                    yield encode(name, payload)
                    terminal = terminal or name in ("done", "failed")
                while not terminal:
                    try:
                        name, payload = sub.get_nowait()
                    except queue.Empty:
                        await asyncio.sleep(0.05)
                        continue
                    yield encode(name, payload)
                    terminal = name in ("done", "failed")
            finally:
                live.unsubscribe(sub)

        return StreamingResponse(stream(), media_type="text/event-stream")

    @app.post("/api/sessions/{session_id}/answers", status_code=204)
    def post_answers(session_id: str, body: AnswersRequest):
        live = _live(session_id)
        with live.lock:
            if live.waiting != "answers":
                raise _error(409, "not_waiting_for_answers")
            assert live.questions is not None
            if len(body.answers) != len(live.questions):
                raise _error(400, "answer_count_mismatch")
            live.waiting = "none"
            live.questions = None
        live.answers_queue.put(list(body.answers))
        return Response(status_code=204)

    @app.post("/api/sessions/{session_id}/feedback", status_code=204)
    def post_feedback(session_id: str, body: FeedbackRequest):
        live = _live(session_id)
        if body.kind == "revise" and not body.text.strip():
            raise _error(400, "empty_revise_text")
        with live.lock:
            if live.waiting != "verdict":
                raise _error(409, "not_waiting_for_verdict")
            live.waiting = "none"
            live.pending_kind = None
            live.pending_content = None
        verdict = accept() if body.kind == "accept" else revise(body.text)
        live.feedback_queue.put(verdict)
        return Response(status_code=204)

    @app.get("/api/sessions/{session_id}/diagram.dot")
    def get_diagram(session_id: str):
        live = _live(session_id)
        with live.lock:
            graph = live.latest_graph
        if graph is None:
            raise _error(404, "no_diagram")
        return PlainTextResponse(to_dot(graph).text, media_type="text/vnd.graphviz")

    @app.get("/api/sessions/{session_id}/diagram.svg")
    def get_diagram_svg(session_id: str):
        live = _live(session_id)
        with live.lock:
            graph = live.latest_graph
        if graph is None:
            raise _error(404, "no_diagram")
        rendered = render_svg_bytes(to_dot(graph).text)
        if rendered is None:
            raise _error(404, "renderer_unavailable")
        return Response(content=rendered, media_type="image/svg+xml")

    @app.get("/api/sessions/{session_id}/summary")
    def get_summary(session_id: str):
        with registry_lock:
            live = registry.get(session_id)
        if live is not None:
            with live.lock:
                summary = live.latest_summary
            if summary is None:
                raise _error(404, "no_summary")
            return PlainTextResponse(summary)
        try:
            state = store.load_session(session_id)
        except (SessionNotFoundError, DaqSynthError):
            raise _error(404, "not_found") from None
        if state.summary is None:
            raise _error(404, "no_summary")
        return PlainTextResponse(state.summary)

    @app.get("/api/sessions/{session_id}/artifacts/pending")
    def get_pending_artifact(session_id: str):
        live = _live(session_id)
        with live.lock:
            content = live.pending_content
        if content is None:
            raise _error(404, "no_pending_artifact")
        return PlainTextResponse(content)

    return app
