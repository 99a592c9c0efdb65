"""Proof-directed play: a session owns a game state and a cursor into the
proof, emits the machine's moves for the rule at the cursor, and reacts to
environment moves with the six wait-time cases (record, record-in-atom,
catch-up, copycat mirror, choice descent, switch echo plus descent).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .formula import Cho, Formula, Hyb, Lit, MACH, Path, Seq, is_general
from .hyper import find_addr, occurrences, show, widowed
from .prover import CHOOSE, MATCH, Proof, SWITCH, WAIT, verify
from .runtime import (
    AtomMove, Choose, GameState, IllegalMove, Move, Player, Switch, seq_leader,
)


@dataclass(frozen=True)
class Emission:
    """A machine move plus the matching environment to inform, if any."""

    move: Move
    env: str | None


@dataclass
class SessionOutcome:
    status: str  # "completely-solved" | "temporarily-solved" | "failed"
    state: GameState
    rejected: list[str] = field(default_factory=list)
    session: "Session | None" = None


class Session:
    def __init__(self, proof: Proof, session_id: str = "local"):
        self.id = session_id
        self.proof = proof
        self.cursor = proof
        self.state = GameState(proof.conclusion)
        self.pending: list[Move] = []
        self.hybrid_pairs: list[tuple[Path, Path]] = []

    # -- views ---------------------------------------------------------------

    @property
    def view(self) -> Formula:
        """Live hyperformula: the cursor's conclusion tracks the game state."""
        return self.cursor.conclusion

    def render(self) -> str:
        return show(self.view)

    def _env_at(self, addr: Path) -> str | None:
        occ = find_addr(self.view, addr)
        return occ.node.env if occ is not None else None

    # -- machine steps ---------------------------------------------------------

    def advance(self) -> list[Emission]:
        """Run machine rules at the cursor until it rests at a Wait node."""
        out: list[Emission] = []
        while self.cursor.rule != WAIT:
            node = self.cursor
            if node.rule == CHOOSE:
                addr, i = node.action
                self._emit(out, Move(Player.MACHINE, addr, Choose(i)))
            elif node.rule == SWITCH:
                (addr,) = node.action
                self._emit(out, Move(Player.MACHINE, addr, Switch()))
            elif node.rule == MATCH:
                pos, neg, _fresh = node.action
                self.hybrid_pairs.append((pos, neg))
                self._copy_pending_atom_moves(out, pos, neg)
            self.cursor = node.premises[0]
        self._drain_pending(out)
        return out

    def _emit(self, out: list[Emission], m: Move) -> None:
        self.state.apply(m)
        out.append(Emission(m, self._env_at(m.path)))

    def _copy_pending_atom_moves(self, out: list[Emission],
                                 pos: Path, neg: Path) -> None:
        for a, b in ((pos, neg), (neg, pos)):
            run_a = self.state.atomruns.get(a, [])
            copied = sum(1 for p, _ in self.state.atomruns.get(b, [])
                         if p is Player.MACHINE)
            todo = [t for p, t in run_a if p is Player.ENV][copied:]
            for text in todo:
                self._emit(out, Move(Player.MACHINE, b, AtomMove(text)))

    # -- environment steps -----------------------------------------------------

    def deliver(self, m: Move) -> list[Emission]:
        """Apply one legal environment move; raises IllegalMove otherwise."""
        if m.player is not Player.ENV:
            raise IllegalMove(m.path, "environment move expected")
        reason = self.state.check(m)
        if reason is not None:
            raise IllegalMove(m.path, reason)
        self.state.apply(m)
        out: list[Emission] = []
        self._react(m, out)
        self._drain_pending(out)
        return out

    def _react(self, m: Move, out: list[Emission]) -> None:
        occ = find_addr(self.view, m.path)
        if occ is None or occ.abandoned:
            return  # case 1: abandoned or vanished region, record only
        node = occ.node
        if isinstance(node, Hyb):
            if widowed(self.view, occ):
                return  # case 1: widowed hybrid literal
            if isinstance(m.payload, AtomMove) and occ.active and occ.surface:
                self._mirror(m, out)  # case 4
                return
            self.pending.append(m)
            return
        if isinstance(node, Lit) and is_general(node.atom):
            return  # case 2: move inside an active general atom
        if isinstance(node, Cho) and isinstance(m.payload, Choose):
            if occ.active and occ.surface:
                self._descend(("choice", m.path, m.payload.i), out)  # case 5
            else:
                self.pending.append(m)
            return
        if isinstance(node, Seq) and isinstance(m.payload, Switch):
            if seq_leader(node) is Player.ENV:
                if occ.active and occ.surface:
                    # case 6: echo the catch-up switch, then descend
                    self._emit(out, Move(Player.MACHINE, m.path, Switch()))
                    self._descend(("advance", m.path), out)
                else:
                    self.pending.append(m)
            # else case 3: catch-up switch in a machine-led chain, record only
            return

    def _mirror(self, m: Move, out: list[Emission]) -> None:
        for pos, neg in self.hybrid_pairs:
            if m.path == pos or m.path == neg:
                twin = neg if m.path == pos else pos
                assert isinstance(m.payload, AtomMove)
                self._emit(out, Move(Player.MACHINE, twin,
                                     AtomMove(m.payload.text)))
                return
        # hybrid whose pair is unknown: record only

    def _descend(self, key: tuple, out: list[Emission]) -> None:
        assert self.cursor.rule == WAIT
        for act, prem in zip(self.cursor.action, self.cursor.premises):
            if act == key:
                self.cursor = prem
                out.extend(self.advance())
                return
        raise IllegalMove(key[1], "no matching premise at the wait node")

    def _drain_pending(self, out: list[Emission]) -> None:
        again = True
        while again:
            again = False
            for i, m in enumerate(list(self.pending)):
                occ = find_addr(self.view, m.path)
                if occ is None or occ.abandoned:
                    self.pending.pop(i)
                    again = True
                    break
                if occ.active and occ.surface:
                    self.pending.pop(i)
                    self._react(m, out)
                    again = True
                    break


def remaining_machine_switches(view: Formula) -> bool:
    """True iff some machine-led chain is active, surface, and unexhausted."""
    for occ in occurrences(view, lambda n: isinstance(n, Seq)):
        n = occ.node
        if (n.who == MACH and occ.active and occ.surface
                and n.u < len(n.kids) - 1):
            return True
    return False


def exec_step(session: Session, move: Move) -> list[Emission]:
    return session.deliver(move)


def run_session(proof: Proof, driver, *, check_proof: bool = True) -> SessionOutcome:
    """Play the proof against an environment driver: a callable that is given
    the session and returns the next environment move, or None to stop."""
    if check_proof and not verify(proof):
        raise ValueError("proof does not verify")
    s = Session(proof)
    s.advance()
    rejected: list[str] = []
    while True:
        mv = driver(s)
        if mv is None:
            break
        try:
            s.deliver(mv)
        except IllegalMove as e:
            rejected.append(str(e))
    s.state.close()
    status = ("temporarily-solved" if remaining_machine_switches(s.view)
              else "completely-solved")
    return SessionOutcome(status, s.state, rejected, s)
