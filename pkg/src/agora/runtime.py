"""Moves, runs, legality, and winner evaluation of finished sessions.

Game evolution is recorded as per-node status over the original (stamped)
session formula, never as structural rewriting, so every move references an
immutable address.  Move rendering: ``⊤|⊥ <path> choose:<i>|switch|atom:<t>``
with the path dot-separated and ``-`` for the root.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping

from .formula import Cho, Const, ENV, Formula, Hyb, Lit, Par, Path, Seq, is_general
from .hyper import occurrences


class Player(Enum):
    MACHINE = "⊤"
    ENV = "⊥"

    @property
    def other(self) -> "Player":
        return Player.ENV if self is Player.MACHINE else Player.MACHINE

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Choose:
    i: int


@dataclass(frozen=True)
class Switch:
    pass


@dataclass(frozen=True)
class AtomMove:
    text: str


Payload = Choose | Switch | AtomMove


@dataclass(frozen=True)
class Move:
    player: Player
    path: Path
    payload: Payload


def fmt_path(p: Path) -> str:
    return ".".join(str(i) for i in p) if p else "-"


def parse_path(s: str) -> Path:
    if s == "-":
        return ()
    try:
        return tuple(int(x) for x in s.split("."))
    except ValueError:
        raise ValueError(f"bad path {s!r}") from None


def render_move(m: Move) -> str:
    if isinstance(m.payload, Choose):
        tail = f"choose:{m.payload.i}"
    elif isinstance(m.payload, Switch):
        tail = "switch"
    else:
        tail = f"atom:{m.payload.text}"
    return f"{m.player} {fmt_path(m.path)} {tail}"


def parse_move(s: str) -> Move:
    parts = s.split()
    if len(parts) != 3:
        raise ValueError(f"bad move {s!r}")
    who, path, action = parts
    if who not in ("⊤", "⊥"):
        raise ValueError(f"bad player {who!r}")
    player = Player.MACHINE if who == "⊤" else Player.ENV
    if action == "switch":
        payload: Payload = Switch()
    elif action.startswith("choose:"):
        payload = Choose(int(action[7:]))
    elif action.startswith("atom:"):
        payload = AtomMove(action[5:])
    else:
        raise ValueError(f"bad move payload {action!r}")
    return Move(player, parse_path(path), payload)


class IllegalMove(ValueError):
    def __init__(self, path: Path, reason: str):
        super().__init__(f"illegal move at {fmt_path(path)}: {reason}")
        self.path = path
        self.reason = reason


def seq_leader(node: Seq) -> Player:
    return Player.ENV if node.who == ENV else Player.MACHINE


@dataclass
class Interpretation:
    """Valuation for elementary atoms plus one deterministic oracle per
    general atom, judging the machine's success from an occurrence-local run.
    Hybrid twins share the oracle of their general component."""

    valuation: Mapping[str, bool] = field(default_factory=dict)
    oracles: Mapping[str, Callable[[tuple], bool]] = field(default_factory=dict)
    default_verdict: bool = False

    def holds(self, atom: str) -> bool:
        return self.valuation.get(atom, False)

    def oracle(self, atom: str) -> Callable[[tuple], bool]:
        fn = self.oracles.get(atom)
        if fn is not None:
            return fn
        return lambda run: self.default_verdict


class GameState:
    """Mutable per-session status over one stamped session formula."""

    def __init__(self, original: Formula):
        self.original = original
        self.index: dict[Path, Formula] = {
            occ.path: occ.node for occ in occurrences(original)}
        self.chosen: dict[Path, int] = {}
        # chains may start mid-way (a session rebuilt against an advanced
        # knowledgebase); their underlines count as already-led switches
        self.lead: dict[Path, int] = {
            p: n.u for p, n in self.index.items()
            if isinstance(n, Seq) and n.u > 0}
        self.catch: dict[Path, int] = {}
        self.atomruns: dict[Path, list[tuple[Player, str]]] = {}
        self.run: list[Move] = []
        self.closed = False

    # -- legality -----------------------------------------------------------

    def check(self, m: Move) -> str | None:
        """None when the move is legal, else the reason it is not."""
        if self.closed:
            return "session closed"
        node = self.index.get(m.path)
        if node is None:
            return "no node at this path"
        pay = m.payload
        if isinstance(pay, Choose):
            if not isinstance(node, Cho):
                return "choose payload at a non-choice node"
            chooser = Player.ENV if node.who == ENV else Player.MACHINE
            if m.player is not chooser:
                return f"choice belongs to {chooser}"
            if not 0 <= pay.i < len(node.kids):
                return "component index out of range"
            if m.path in self.chosen:
                return "choice already made"
            return None
        if isinstance(pay, Switch):
            if not isinstance(node, Seq):
                return "switch payload at a non-sequential node"
            last = len(node.kids) - 1
            if m.player is seq_leader(node):
                if self.lead.get(m.path, 0) >= last:
                    return "chain exhausted"
                return None
            if self.catch.get(m.path, 0) >= self.lead.get(m.path, 0):
                return "no leading switch to catch up with"
            return None
        if not (isinstance(node, Hyb)
                or (isinstance(node, Lit) and is_general(node.atom))):
            return "atom move at a non-general node"
        return None

    def legal(self, m: Move) -> bool:
        return self.check(m) is None

    def apply(self, m: Move) -> "GameState":
        reason = self.check(m)
        if reason is not None:
            raise IllegalMove(m.path, reason)
        pay = m.payload
        if isinstance(pay, Choose):
            self.chosen[m.path] = pay.i
        elif isinstance(pay, Switch):
            node = self.index[m.path]
            if m.player is seq_leader(node):
                self.lead[m.path] = self.lead.get(m.path, 0) + 1
            else:
                self.catch[m.path] = self.catch.get(m.path, 0) + 1
        else:
            self.atomruns.setdefault(m.path, []).append((m.player, pay.text))
        self.run.append(m)
        return self

    def close(self) -> "GameState":
        self.closed = True
        return self

    # -- evaluation -----------------------------------------------------------

    def _atom_value(self, node: Lit | Hyb, path: Path, interp: Interpretation) -> bool:
        run = tuple(self.atomruns.get(path, ()))
        if node.neg:
            run = tuple((p.other, t) for p, t in run)
        name = node.gen if isinstance(node, Hyb) else node.atom
        verdict = interp.oracle(name)(run)
        return (not verdict) if node.neg else verdict

    def _value(self, node: Formula, path: Path, interp: Interpretation) -> bool:
        if isinstance(node, Const):
            return node.val
        if isinstance(node, Lit):
            if is_general(node.atom):
                return self._atom_value(node, path, interp)
            return interp.holds(node.atom) != node.neg
        if isinstance(node, Hyb):
            return self._atom_value(node, path, interp)
        if isinstance(node, Par):
            vals = (self._value(k, path + (i,), interp)
                    for i, k in enumerate(node.kids))
            return all(vals) if node.op == "and" else any(vals)
        if isinstance(node, Cho):
            i = self.chosen.get(path)
            if i is None:
                # unresolved choices mirror the elementarization verdict
                return node.who == ENV
            return self._value(node.kids[i], path + (i,), interp)
        i = self.lead.get(path, 0)  # catch-up switches never select
        return self._value(node.kids[i], path + (i,), interp)

    def winner(self, interp: Interpretation) -> Player:
        if not self.closed:
            raise ValueError("session not terminated")
        ok = self._value(self.original, (), interp)
        return Player.MACHINE if ok else Player.ENV


def winner(state: GameState, interp: Interpretation) -> Player:
    return state.winner(interp)


def mirror_deficit(state: GameState, pos_path: Path, neg_path: Path) -> int:
    """Environment atom moves in either hybrid occurrence that the machine
    has not yet copied into the twin; 0 means perfect copycat."""
    def gen_name(n) -> str | None:
        if isinstance(n, Hyb):
            return n.gen
        if isinstance(n, Lit) and is_general(n.atom):
            return n.atom
        return None

    a, b = state.index.get(pos_path), state.index.get(neg_path)
    ga, gb = gen_name(a), gen_name(b)
    if ga is None or ga != gb or pos_path == neg_path:
        raise ValueError("paths do not identify one hybrid pair")
    ra = state.atomruns.get(pos_path, [])
    rb = state.atomruns.get(neg_path, [])

    def envs(r):
        return sum(1 for p, _ in r if p is Player.ENV)

    def machs(r):
        return sum(1 for p, _ in r if p is Player.MACHINE)

    return max(0, envs(ra) - machs(rb)) + max(0, envs(rb) - machs(ra))
