"""HTTP surface for live interactive sessions.

Endpoints (bodies and payload field names are documented in API.md):

    POST /sessions                     create a session
    GET  /sessions/{id}                phase + counters summary
    POST /sessions/{id}/subgoals       submit subgoal states
    POST /sessions/{id}/round          run one rollout/update/fit round
    POST /sessions/{id}/demonstration  submit a partial demonstration
    GET  /sessions/{id}/view           everything the UI draws
    GET  /sessions/{id}/history        per-round records

Errors carry machine-readable codes inside the response detail:
404 not_found, 409 wrong_phase, 422 invalid_input.
"""

from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from ..errors import ConfigError, PhaseError, SubgoalIrlError
from ..layouts import builtin_layout_path
from .engine import SessionConfig
from .store import SessionNotFound, SessionStore


class CreateSessionBody(BaseModel):
    env_kind: str = "grid"
    environment: str = Field(description="layout text, or a bundled layout name")
    seed: int = 0
    expert: str = "simulated"
    model: str = "linear"
    step_thr: int = 2
    alpha: float = 0.05
    iterations: int = 60
    horizon: int = 0
    vi_tolerance: float = 1e-4
    lam: float = 10.0
    alpha_lambda: float = 0.97
    lambda_min: float = 1.0
    action_rule: str = "sample"
    initial_demos: int = 1
    max_rounds: int = 50
    finish_streak: int = 2


class SubgoalsBody(BaseModel):
    states: list[int]


class DemonstrationBody(BaseModel):
    states: list[int]


def _resolve_environment(text: str) -> str:
    if "\n" in text:
        return text
    path = Path(text)
    if not path.exists():
        path = builtin_layout_path(text)
    if not path.exists():
        raise ConfigError(f"layout not found: {text}")
    return path.read_text()


def _error(status: int, code: str, message: str):
    return HTTPException(status_code=status,
                         detail={"code": code, "message": message})


def create_app(sessions_dir, frontend_dir=None) -> FastAPI:
    app = FastAPI(title="subgoal-irl session service", version="1")
    store = SessionStore(sessions_dir)
    app.state.store = store

    @app.exception_handler(PhaseError)
    async def _phase_error(request, exc):
        from fastapi.responses import JSONResponse
        return JSONResponse(status_code=409, content={
            "detail": {"code": "wrong_phase", "message": str(exc),
                       "phase": exc.actual}})

    @app.exception_handler(SessionNotFound)
    async def _not_found(request, exc):
        from fastapi.responses import JSONResponse
        return JSONResponse(status_code=404, content={
            "detail": {"code": "not_found", "message": str(exc)}})

    @app.exception_handler(SubgoalIrlError)
    async def _invalid(request, exc):
        from fastapi.responses import JSONResponse
        return JSONResponse(status_code=422, content={
            "detail": {"code": "invalid_input", "message": str(exc)}})

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        config = SessionConfig(**{**body.model_dump(),
                                  "environment": _resolve_environment(body.environment)})
        engine = store.create(config)
        return {"session_id": engine.session_id, "phase": engine.phase}

    @app.get("/sessions")
    def list_sessions():
        return {"sessions": store.list_sessions()}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return store.get(session_id).summary()

    @app.post("/sessions/{session_id}/subgoals")
    def submit_subgoals(session_id: str, body: SubgoalsBody):
        engine = store.apply(session_id, {"type": "subgoals",
                                          "states": body.states})
        return {"phase": engine.phase, "subgoals": list(engine.subgoals.states)}

    @app.post("/sessions/{session_id}/round")
    def step_round(session_id: str):
        engine = store.apply(session_id, {"type": "round"})
        payload = {"phase": engine.phase, "counters": engine.counters(),
                   "overall_success": engine.last_outcome.overall_success,
                   "subtasks": [{"start": r.spec.start, "target": r.spec.target,
                                 "budget": r.spec.budget,
                                 "succeeded": r.succeeded,
                                 "states": r.trajectory.states}
                                for r in engine.last_outcome.subtasks]}
        if engine.pending_subtask is not None:
            spec = engine.pending_subtask
            payload["pending_subtask"] = {"start": spec.start,
                                          "target": spec.target,
                                          "budget": spec.budget,
                                          "alternatives": list(spec.alternatives)}
        return payload

    @app.post("/sessions/{session_id}/demonstration")
    def submit_demonstration(session_id: str, body: DemonstrationBody):
        engine = store.apply(session_id, {"type": "demonstration",
                                          "states": body.states})
        return {"phase": engine.phase, "counters": engine.counters()}

    @app.get("/sessions/{session_id}/view")
    def get_view(session_id: str):
        return store.get(session_id).view()

    @app.get("/sessions/{session_id}/history")
    def get_history(session_id: str):
        return {"rounds": store.get(session_id).history_rows()}

    if frontend_dir:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=frontend_dir, html=True),
                  name="frontend")

    return app
