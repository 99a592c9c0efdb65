"""Service layer: every endpoint is a plain function from request model to
response model, shared by the HTTP app and the in-process CLI client."""

from __future__ import annotations

import tempfile
from pathlib import Path as FsPath

from ..executor import Session
from ..formula import AgentFileError, ParseError, parse_agent_file, parse_formula
from ..prover import Proof, ProofTimeout, Unprovable, proof_nodes, proof_to_text, prove, rule_counts, verify
from ..runtime import AtomMove, Choose, IllegalMove, Interpretation, Move, Player, Switch, parse_path, render_move
from ..scenario import ScenarioError, Runner, check_assertions, load_scenario
from .models import (
    CheckRequest, CheckResponse, Diagnostic, PlayCreateResponse,
    PlayMoveRequest, PlayMoveResponse, PlayQuitResponse, PlayRequest,
    PlayView, ProveRequest, ProveResponse, RunRequest, RunResponse,
)


def handle_prove(req: ProveRequest) -> ProveResponse:
    try:
        goal = parse_formula(req.formula)
    except ParseError as e:
        return ProveResponse(status="parse-error", detail=str(e))
    res = prove(goal, budget=req.budget)
    if isinstance(res, Unprovable):
        return ProveResponse(status="unprovable", explored=res.explored)
    if isinstance(res, ProofTimeout):
        return ProveResponse(status="timeout", explored=res.explored)
    checked = verify(res) if req.verify else None
    return ProveResponse(
        status="provable", proof=proof_to_text(res), nodes=proof_nodes(res),
        rules=dict(rule_counts(res)), verified=checked)


def handle_check(req: CheckRequest) -> CheckResponse:
    agents: list[str] = []
    seen: set[str] = set()
    diags: list[Diagnostic] = []
    specs: list[tuple[str, object]] = []
    scenario_scope = False
    for f in req.files:
        if f.name.endswith(".cfg"):
            scenario_scope = True
            from ..scenario import parse_config
            try:
                parse_config(f.text)
            except ScenarioError as e:
                diags.append(Diagnostic(file=f.name, message=str(e)))
            continue
        try:
            spec = parse_agent_file(f.text)
        except (AgentFileError, ParseError) as e:
            diags.append(Diagnostic(file=f.name, message=str(e)))
            continue
        if spec.name in seen:
            diags.append(Diagnostic(
                file=f.name, message=f"duplicate agent {spec.name!r}"))
            continue
        seen.add(spec.name)
        agents.append(spec.name)
        specs.append((f.name, spec))
    if scenario_scope:
        from ..agentd import KBState
        for fname, spec in specs:
            kb = KBState(spec.kb)
            for i in range(len(spec.kb)):
                provider = kb.provider_of(i)
                if provider is not None and provider not in seen:
                    diags.append(Diagnostic(
                        file=fname,
                        message=f"entry {i} names unknown agent {provider!r}"))
    return CheckResponse(ok=not diags, agents=agents, diagnostics=diags)


def handle_run(req: RunRequest) -> RunResponse:
    with tempfile.TemporaryDirectory() as tmp:
        root = FsPath(tmp)
        for f in req.files:
            name = FsPath(f.name).name
            (root / name).write_text(f.text, encoding="utf-8")
        try:
            scenario = load_scenario(root)
        except (ScenarioError, AgentFileError, ParseError) as e:
            return RunResponse(ok=False, trace=[], detail=str(e))
        if req.seed is not None:
            scenario.config.seed = req.seed
        if req.ticks is not None:
            scenario.config.ticks = req.ticks
        trace = Runner(scenario).run()
    failed = None
    if req.assertions:
        failed = check_assertions(trace, req.assertions)
    return RunResponse(ok=failed is None, trace=[ev.line() for ev in trace],
                       failed_assertion=failed)


class PlayStore:
    """Live interactive sessions, owned by one service instance."""

    def __init__(self):
        self.sessions: dict[str, tuple[Session, Interpretation]] = {}
        self.counter = 0

    def view_of(self, sid: str, machine_moves: list[str],
                finished: bool = False) -> PlayView:
        session, _ = self.sessions[sid]
        return PlayView(session_id=sid, view=session.render(),
                        machine_moves=machine_moves, finished=finished)

    def create(self, req: PlayRequest) -> PlayCreateResponse:
        try:
            goal = parse_formula(req.formula)
        except ParseError as e:
            return PlayCreateResponse(ok=False, detail=f"parse error: {e}")
        res = prove(goal, budget=req.budget)
        if isinstance(res, Unprovable):
            return PlayCreateResponse(ok=False, detail="formula is unprovable")
        if isinstance(res, ProofTimeout):
            return PlayCreateResponse(ok=False, detail="proof search budget exceeded")
        assert isinstance(res, Proof)
        sid = f"play:{self.counter}"
        self.counter += 1
        session = Session(res, sid)
        interp = Interpretation(dict(req.valuation))
        self.sessions[sid] = (session, interp)
        moves = [render_move(em.move) for em in session.advance()]
        return PlayCreateResponse(ok=True, play=self.view_of(sid, moves))

    @staticmethod
    def parse_command(text: str) -> Move:
        words = text.split()
        if not words:
            raise ValueError("empty command")
        kind = words[0]
        if kind == "choose" and len(words) == 3:
            return Move(Player.ENV, parse_path(words[1]), Choose(int(words[2])))
        if kind == "switch" and len(words) == 2:
            return Move(Player.ENV, parse_path(words[1]), Switch())
        if kind == "atom" and len(words) == 3:
            return Move(Player.ENV, parse_path(words[1]), AtomMove(words[2]))
        raise ValueError(
            "expected: choose <path> <i> | switch <path> | atom <path> <text>")

    def move(self, sid: str, req: PlayMoveRequest) -> PlayMoveResponse:
        if sid not in self.sessions:
            return PlayMoveResponse(ok=False, detail="unknown session")
        session, _ = self.sessions[sid]
        try:
            mv = self.parse_command(req.command)
        except ValueError as e:
            return PlayMoveResponse(ok=False, detail=str(e),
                                    play=self.view_of(sid, []))
        try:
            ems = session.deliver(mv)
        except IllegalMove as e:
            return PlayMoveResponse(ok=False, detail=str(e),
                                    play=self.view_of(sid, []))
        moves = [render_move(em.move) for em in ems]
        return PlayMoveResponse(ok=True, play=self.view_of(sid, moves))

    def quit(self, sid: str) -> PlayQuitResponse | None:
        if sid not in self.sessions:
            return None
        session, interp = self.sessions.pop(sid)
        session.state.close()
        w = session.state.winner(interp)
        return PlayQuitResponse(winner=str(w), view=session.render())
