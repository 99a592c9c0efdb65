"""HTTP surface: a FastAPI app wrapping the service layer."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from . import handlers
from .handlers import PlayStore
from .models import (
    CheckRequest, CheckResponse, PlayCreateResponse, PlayMoveRequest,
    PlayMoveResponse, PlayQuitResponse, PlayRequest, ProveRequest,
    ProveResponse, RunRequest, RunResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(title="agora", version=__version__)
    store = PlayStore()
    app.state.play = store

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/prove", response_model=ProveResponse)
    def prove(req: ProveRequest):
        return handlers.handle_prove(req)

    @app.post("/check", response_model=CheckResponse)
    def check(req: CheckRequest):
        return handlers.handle_check(req)

    @app.post("/scenarios/run", response_model=RunResponse)
    def run(req: RunRequest):
        return handlers.handle_run(req)

    @app.post("/play", response_model=PlayCreateResponse)
    def play_create(req: PlayRequest):
        return store.create(req)

    @app.get("/play/{sid}", response_model=PlayMoveResponse)
    def play_view(sid: str):
        if sid not in store.sessions:
            raise HTTPException(404, "unknown session")
        return PlayMoveResponse(ok=True, play=store.view_of(sid, []))

    @app.post("/play/{sid}/moves", response_model=PlayMoveResponse)
    def play_move(sid: str, req: PlayMoveRequest):
        return store.move(sid, req)

    @app.post("/play/{sid}/quit", response_model=PlayQuitResponse)
    def play_quit(sid: str):
        res = store.quit(sid)
        if res is None:
            raise HTTPException(404, "unknown session")
        return res

    return app


app = create_app()
