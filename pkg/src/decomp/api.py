"""HTTP JSON API over the session service.

Thin by design: every handler validates input, calls one service method and
maps domain errors to status codes (404 unknown session, 409 wrong phase,
400 bad input).  Event delivery offers plain polling with optional long-poll
(?wait_ms=) and a server-sent-events stream for clients that prefer a push
feed; both carry the same event objects.
"""

from __future__ import annotations

import json
import time
from typing import Any, Iterator

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse

from .session import Phase, SessionNotFound, SessionService, WrongPhase


def create_app(service: SessionService) -> FastAPI:
    app = FastAPI(title="decomp session service", docs_url=None, redoc_url=None)

    @app.exception_handler(SessionNotFound)
    async def _not_found(_request: Request, exc: SessionNotFound) -> JSONResponse:
        return JSONResponse(status_code=404, content={"error": str(exc), "code": "not_found"})

    @app.exception_handler(WrongPhase)
    async def _wrong_phase(_request: Request, exc: WrongPhase) -> JSONResponse:
        return JSONResponse(status_code=409, content={"error": str(exc), "code": "wrong_phase"})

    @app.exception_handler(ValueError)
    async def _bad_input(_request: Request, exc: ValueError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"error": str(exc), "code": "bad_input"})

    @app.get("/healthz")
    def healthz() -> dict[str, str]:
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request) -> dict[str, Any]:
        body = await _json_body(request)
        problem = body.get("problem", "")
        if not isinstance(problem, str):
            raise ValueError("'problem' must be a string")
        session_id = service.create_session(problem)
        view = service.start_clarification(session_id)
        return view.to_dict()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict[str, Any]:
        return service.get_session(session_id).to_dict()

    @app.post("/sessions/{session_id}/messages")
    async def post_message(session_id: str, request: Request) -> dict[str, Any]:
        body = await _json_body(request)
        text = body.get("text", "")
        if not isinstance(text, str):
            raise ValueError("'text' must be a string")
        return service.post_message(session_id, text).to_dict()

    @app.get("/sessions/{session_id}/events")
    def get_events(session_id: str, since: int = 0, wait_ms: int = 0) -> dict[str, Any]:
        # Long-poll budget is capped so a dead client cannot pin a worker.
        events = service.get_events(session_id, since_seq=since, wait_ms=min(wait_ms, 25_000))
        return {
            "events": [e.to_dict() for e in events],
            "last_seq": events[-1].seq if events else since,
            "phase": service.phase_of(session_id).value,
        }

    @app.get("/sessions/{session_id}/events/stream")
    def stream_events(session_id: str, since: int = 0) -> StreamingResponse:
        service.get_session(session_id)  # 404 before the stream starts

        def feed() -> Iterator[str]:
            cursor = since
            idle_started = time.monotonic()
            while True:
                events = service.get_events(session_id, since_seq=cursor, wait_ms=1000)
                for event in events:
                    cursor = event.seq
                    yield f"data: {json.dumps(event.to_dict())}\n\n"
                if events:
                    idle_started = time.monotonic()
                phase = service.phase_of(session_id)
                if phase in (Phase.DONE, Phase.FAILED):
                    yield f"event: end\ndata: {json.dumps({'phase': phase.value})}\n\n"
                    return
                if time.monotonic() - idle_started > 300:
                    return  # give up on sessions idle for five minutes
                yield ": keep-alive\n\n"

        return StreamingResponse(feed(), media_type="text/event-stream")

    return app


async def _json_body(request: Request) -> dict[str, Any]:
    try:
        body = await request.json()
    except json.JSONDecodeError as exc:
        raise ValueError(f"request body is not valid JSON: {exc.msg}") from exc
    if not isinstance(body, dict):
        raise ValueError("request body must be a JSON object")
    return body
