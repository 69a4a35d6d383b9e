"""HTTP service over the orchestrator.

Every mutation endpoint wraps exactly one orchestrator operation; no
pipeline logic lives here. Long-running steps return 202 immediately and
run on a worker pool; clients poll the session until its state advances.
Module errors map onto a closed set of wire codes with fixed HTTP statuses.
"""

from __future__ import annotations

import socket
from concurrent.futures import Future, ThreadPoolExecutor
from contextlib import asynccontextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field

from .backends import build_backends
from .domain import HallucinationTaxonomy, PromptSpec, Session, Strategy
from .errors import (
    BackendFailure,
    BindFailure,
    CapabilityMissing,
    ConcurrentStep,
    ContentPolicyRejection,
    FactpipeError,
    IllegalTransition,
    InvalidPrompt,
    InvalidRequest,
    NotFound,
    QuotaExceeded,
    SelectionOutOfBounds,
    SequenceConflict,
    UnparseableClassification,
    UnparseableGuidance,
)
from .orchestrator import Orchestrator, PipelineConfig, StepCommand
from .store import (
    Store,
    artifact_to_dict,
    candidate_to_dict,
    guidance_to_dict,
    isoformat_utc,
    prompt_to_dict,
)

# One wire code per module error, with its fixed HTTP status. Subclasses
# must precede their base classes.
ERROR_TABLE: list[tuple[type, str, int]] = [
    (InvalidPrompt, "invalid_prompt", 400),
    (IllegalTransition, "illegal_transition", 409),
    (SelectionOutOfBounds, "selection_out_of_bounds", 422),
    (QuotaExceeded, "quota_exceeded", 502),
    (ContentPolicyRejection, "backend_failure", 502),
    (BackendFailure, "backend_failure", 502),
    (CapabilityMissing, "capability_missing", 502),
    (UnparseableGuidance, "unparseable_guidance", 422),
    (UnparseableClassification, "unparseable_guidance", 422),
    (InvalidRequest, "invalid_prompt", 400),
    (NotFound, "not_found", 404),
    (ConcurrentStep, "conflict", 409),
    (SequenceConflict, "conflict", 409),
]


def classify_error(exc: FactpipeError) -> tuple[str, int]:
    for exc_type, code, status in ERROR_TABLE:
        if isinstance(exc, exc_type):
            return code, status
    return "backend_failure", 502


@dataclass
class AppSettings:
    data_dir: Optional[str] = None
    profile: str = "mock"
    config_path: Optional[str] = None
    ui_dir: Optional[str] = None


class PromptBody(BaseModel):
    model_config = ConfigDict(extra="forbid")

    text: str
    subject_hint: Optional[str] = None
    temporal_qualifier: Optional[str] = None
    taxonomy_hint: Optional[str] = None


class ConfigBody(BaseModel):
    model_config = ConfigDict(extra="forbid")

    retrieval_count_n: int = Field(default=10, ge=1)
    auto_select: bool = False
    strategy_override: Optional[str] = None
    seed: Optional[int] = None


class CreateSessionBody(BaseModel):
    prompt: PromptBody
    config: Optional[ConfigBody] = None


class StepBody(BaseModel):
    command: str


class SelectBody(BaseModel):
    index: int


class RouteBody(BaseModel):
    strategy_override: Optional[str] = None


class GuidanceBody(BaseModel):
    text: str


_STRATEGY_ALIASES = {
    "instruction": Strategy.InstructionEdit,
    "instruction_edit": Strategy.InstructionEdit,
    "image-prompt": Strategy.ImagePromptEdit,
    "image_prompt": Strategy.ImagePromptEdit,
    "image_prompt_edit": Strategy.ImagePromptEdit,
}

_STEP_COMMANDS = {
    "generate_initial": StepCommand.GenerateInitial,
    "retrieve": StepCommand.Retrieve,
    "classify_route": StepCommand.ClassifyAndRoute,
    "generate_guidance": StepCommand.GenerateGuidance,
    "apply_edit": StepCommand.ApplyEdit,
    "complete": StepCommand.Complete,
}


def parse_strategy(value: Optional[str]) -> Optional[Strategy]:
    if value is None or value == "auto":
        return None
    strategy = _STRATEGY_ALIASES.get(value)
    if strategy is None:
        raise InvalidPrompt(f"unknown strategy {value!r}")
    return strategy


def session_projection(session: Session, step_in_flight: bool = False) -> dict[str, Any]:
    return {
        "session_id": session.session_id,
        "prompt": prompt_to_dict(session.prompt),
        "state": session.state.value,
        "retrieval_count_n": session.retrieval_count_n,
        "initial_image": artifact_to_dict(session.initial_image) if session.initial_image else None,
        "candidates": [candidate_to_dict(c) for c in session.candidates],
        "selected_index": session.selected_index,
        "taxonomy": session.taxonomy.value if session.taxonomy else None,
        "scope": session.scope.value if session.scope else None,
        "strategy": session.strategy.value if session.strategy else None,
        "strategy_overridden": session.strategy_overridden,
        "guidance": guidance_to_dict(session.guidance) if session.guidance else None,
        "edited_image": artifact_to_dict(session.edited_image) if session.edited_image else None,
        "created_at": isoformat_utc(session.created_at),
        "updated_at": isoformat_utc(session.updated_at),
        "event_log": [
            {
                "sequence": event.sequence,
                "kind": event.kind.value,
                "payload": event.payload,
                "occurred_at": isoformat_utc(event.occurred_at),
            }
            for event in session.event_log
        ],
        "step_in_flight": step_in_flight,
    }


def create_app(settings: Optional[AppSettings] = None) -> FastAPI:
    settings = settings or AppSettings()
    store = Store(settings.data_dir)
    backends = build_backends(
        settings.profile,
        resolve_blob=lambda content_hash: store.get_blob(content_hash)[0],
        config_path=settings.config_path,
    )
    orchestrator = Orchestrator(store, backends)
    executor = ThreadPoolExecutor(max_workers=8, thread_name_prefix="factpipe-step")
    step_futures: dict[str, Future] = {}

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        executor.shutdown(wait=True)  # drain in-flight steps

    app = FastAPI(title="factpipe", lifespan=lifespan)
    app.state.store = store
    app.state.orchestrator = orchestrator

    @app.exception_handler(FactpipeError)
    async def factpipe_error_handler(request: Request, exc: FactpipeError):
        code, status = classify_error(exc)
        session_id = request.path_params.get("session_id")
        return JSONResponse(
            status_code=status,
            content={"error": {"code": code, "message": str(exc), "session_id": session_id}},
        )

    def _step_in_flight(session_id: str) -> bool:
        future = step_futures.get(session_id)
        return future is not None and not future.done()

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/v1/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        taxonomy_hint = (
            HallucinationTaxonomy(body.prompt.taxonomy_hint)
            if body.prompt.taxonomy_hint
            else None
        )
        prompt = PromptSpec(
            text=body.prompt.text,
            subject_hint=body.prompt.subject_hint,
            temporal_qualifier=body.prompt.temporal_qualifier,
            taxonomy_hint=taxonomy_hint,
        )
        config_body = body.config or ConfigBody()
        config = PipelineConfig(
            retrieval_count_n=config_body.retrieval_count_n,
            auto_select=config_body.auto_select,
            strategy_override=parse_strategy(config_body.strategy_override),
            backend_profile=settings.profile,
            seed=config_body.seed,
        )
        session = orchestrator.create_session(prompt, config)
        return session_projection(session)

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str):
        session = store.load_session(session_id)
        return session_projection(session, _step_in_flight(session_id))

    @app.post("/v1/sessions/{session_id}/steps", status_code=202)
    def run_step_async(session_id: str, body: StepBody):
        command = _STEP_COMMANDS.get(body.command)
        if command is None:
            raise InvalidPrompt(
                f"unknown step command {body.command!r} "
                f"(one of {sorted(_STEP_COMMANDS)})"
            )
        session = store.load_session(session_id)
        if _step_in_flight(session_id):
            raise ConcurrentStep(f"session {session_id} already has a step in flight")
        from .domain import transition
        from .orchestrator import STEP_EVENT_KINDS

        transition(session.state, STEP_EVENT_KINDS[command])  # fail fast with 409
        step_futures[session_id] = executor.submit(orchestrator.run_step, session, command)
        return {"accepted": True, "session_id": session_id, "command": body.command}

    @app.post("/v1/sessions/{session_id}/select")
    def select_candidate(session_id: str, body: SelectBody):
        session = store.load_session(session_id)
        if _step_in_flight(session_id):
            raise ConcurrentStep(f"session {session_id} already has a step in flight")
        session = orchestrator.run_step(session, StepCommand.Select, select_index=body.index)
        return session_projection(session)

    @app.post("/v1/sessions/{session_id}/route")
    def route_session(session_id: str, body: RouteBody):
        session = store.load_session(session_id)
        if _step_in_flight(session_id):
            raise ConcurrentStep(f"session {session_id} already has a step in flight")
        override = parse_strategy(body.strategy_override)
        if session.strategy is None:
            session = orchestrator.run_step(
                session, StepCommand.ClassifyAndRoute, strategy_override=override
            )
        else:
            if override is None:
                raise InvalidPrompt("session is already routed; an override is required")
            session = orchestrator.override_strategy(session, override)
        return session_projection(session)

    @app.put("/v1/sessions/{session_id}/guidance")
    def replace_guidance(session_id: str, body: GuidanceBody):
        session = store.load_session(session_id)
        if _step_in_flight(session_id):
            raise ConcurrentStep(f"session {session_id} already has a step in flight")
        session = orchestrator.replace_guidance(session, body.text)
        return session_projection(session)

    @app.get("/v1/blobs/{content_hash}")
    def get_blob(content_hash: str):
        data, _ = store.get_blob(content_hash)
        return Response(content=data, media_type="image/png")

    ui_dir = settings.ui_dir
    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def serve(
    settings: AppSettings, host: str = "127.0.0.1", port: int = 8765
) -> None:
    """Run the HTTP service until interrupted.

    The listen socket is bound before uvicorn starts so an occupied port
    surfaces as BindFailure instead of a half-started server.
    """
    import uvicorn

    app = create_app(settings)
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        sock.bind((host, port))
    except OSError as exc:
        sock.close()
        raise BindFailure(f"cannot bind {host}:{port}: {exc}") from exc
    sock.listen(128)
    config = uvicorn.Config(app, log_level="info")
    server = uvicorn.Server(config)
    server.run(sockets=[sock])
