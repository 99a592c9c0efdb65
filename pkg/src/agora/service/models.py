"""Request/response models of the service surface."""

from __future__ import annotations

from pydantic import BaseModel, Field


class ProveRequest(BaseModel):
    formula: str
    budget: int | None = None
    verify: bool = False


class ProveResponse(BaseModel):
    status: str  # "provable" | "unprovable" | "timeout" | "parse-error"
    detail: str = ""
    proof: str | None = None
    nodes: int = 0
    rules: dict[str, int] = Field(default_factory=dict)
    explored: int = 0
    verified: bool | None = None


class FilePayload(BaseModel):
    name: str
    text: str


class CheckRequest(BaseModel):
    files: list[FilePayload]


class Diagnostic(BaseModel):
    file: str
    message: str


class CheckResponse(BaseModel):
    ok: bool
    agents: list[str] = Field(default_factory=list)
    diagnostics: list[Diagnostic] = Field(default_factory=list)


class RunRequest(BaseModel):
    files: list[FilePayload]
    assertions: list[str] | None = None
    seed: int | None = None
    ticks: int | None = None


class RunResponse(BaseModel):
    ok: bool
    trace: list[str]
    failed_assertion: str | None = None
    detail: str = ""


class PlayRequest(BaseModel):
    formula: str
    valuation: dict[str, bool] = Field(default_factory=dict)
    budget: int | None = None


class PlayView(BaseModel):
    session_id: str
    view: str
    machine_moves: list[str] = Field(default_factory=list)
    finished: bool = False


class PlayCreateResponse(BaseModel):
    ok: bool
    detail: str = ""
    play: PlayView | None = None


class PlayMoveRequest(BaseModel):
    command: str  # "choose <path> <i>" | "switch <path>" | "atom <path> <text>"


class PlayMoveResponse(BaseModel):
    ok: bool
    detail: str = ""
    play: PlayView | None = None


class PlayQuitResponse(BaseModel):
    winner: str
    view: str
