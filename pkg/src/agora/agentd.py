"""Agents as addressable endpoints: wire protocol, knowledgebase state, and
the income/solved-queue scheduler.

Wire protocol, one line per frame (UTF-8):

    QUERY <session> <from> <to> <formula-text>
    MOVE  <session> <from> <to> <player> <path> choose:<i>|switch|atom:<text>
    OK <session>
    FAIL <session> <reason>
    DONE <session>

Session ids are ``<origin>:<counter>``.  Move paths are relative to the
query formula, the game both endpoints share; the sender labels the move
with its role in the provider's frame (the provider of the game is ⊤).

A knowledgebase entry is a standing resource: the first session that needs
it opens one query to the provider, later sessions bind the same channel.
Switches arriving on such a channel advance the entry's progress and bump
the revision counter, which is what wakes up temporarily solved queries.
"""

from __future__ import annotations

import socket
from collections import deque
from dataclasses import dataclass, replace

from .formula import (
    AgentSpec, Cho, ENV, Formula, Lit, MACH, Par, ParseError, Path, Seq,
    annotate, children, is_general, negate, parse_formula, pretty, skeleton,
)
from . import hyper
from .executor import Emission, Session, remaining_machine_switches
from .prover import Proof, Unprovable, prove, verify
from .runtime import (
    Choose, IllegalMove, Move, Player, Switch, parse_move, render_move,
)

COMPLETELY = "completely"
TEMPORARILY = "temporarily"


# ---------------------------------------------------------------------------
# Messages and codec

KINDS = ("QUERY", "MOVE", "OK", "FAIL", "DONE")


@dataclass(frozen=True)
class Message:
    kind: str
    session: str
    sender: str = ""
    receiver: str = ""
    body: str = ""


class WireError(ValueError):
    def __init__(self, message: str, pos: int = 0):
        super().__init__(f"col {pos}: {message}")
        self.pos = pos


def encode_message(m: Message) -> str:
    if m.kind == "QUERY":
        return f"QUERY {m.session} {m.sender} {m.receiver} {m.body}"
    if m.kind == "MOVE":
        return f"MOVE {m.session} {m.sender} {m.receiver} {m.body}"
    if m.kind == "OK":
        return f"OK {m.session}"
    if m.kind == "DONE":
        return f"DONE {m.session}"
    if m.kind == "FAIL":
        return f"FAIL {m.session} {m.body}"
    raise ValueError(f"unknown message kind {m.kind!r}")


def decode_message(line: str) -> Message:
    if not line or line != line.strip("\r\n"):
        raise WireError("frame must be a single stripped line", 0)
    head, _, rest = line.partition(" ")
    if head not in KINDS:
        raise WireError(f"unknown frame kind {head!r}", 0)
    if head in ("OK", "DONE"):
        if not rest or " " in rest:
            raise WireError("expected exactly one session field", len(head) + 1)
        return Message(head, rest)
    if head == "FAIL":
        sid, _, reason = rest.partition(" ")
        if not sid or not reason or " " in reason:
            raise WireError("expected session and one reason token", len(head) + 1)
        return Message(head, sid, body=reason)
    fields = rest.split(" ", 3)
    if len(fields) < 4 or not all(fields[:3]):
        raise WireError("truncated frame", len(head) + 1)
    sid, sender, receiver, body = fields
    if head == "MOVE":
        try:
            parse_wire_move(body)
        except ValueError as e:
            raise WireError(str(e), len(line) - len(body)) from None
    return Message(head, sid, sender, receiver, body)


def wire_move(player: Player, path: Path, payload) -> str:
    return render_move(Move(player, path, payload))


def parse_wire_move(body: str) -> Move:
    return parse_move(body)


# ---------------------------------------------------------------------------
# In-process bus

class Bus:
    """Mailbox transport.  Frames are encoded on post and decoded on fetch,
    so everything crossing the bus is forced through the wire format."""

    def __init__(self):
        self.boxes: dict[str, deque[str]] = {}
        self.sessions: dict[str, tuple[str, str]] = {}

    def register(self, name: str) -> None:
        self.boxes.setdefault(name, deque())

    def route(self, sender: str, m: Message) -> str:
        if m.receiver:
            return m.receiver
        pair = self.sessions.get(m.session)
        if pair is None:
            raise WireError(f"no route for session {m.session}")
        a, b = pair
        return b if sender == a else a

    def post(self, sender: str, m: Message) -> str:
        if m.kind == "QUERY":
            self.sessions[m.session] = (m.sender, m.receiver)
        receiver = self.route(sender, m)
        if receiver not in self.boxes:
            raise WireError(f"unknown endpoint {receiver!r}")
        self.boxes[receiver].append(encode_message(m))
        return receiver

    def fetch(self, name: str) -> list[Message]:
        out = []
        box = self.boxes[name]
        while box:
            out.append(decode_message(box.popleft()))
        return out


# ---------------------------------------------------------------------------
# Socket transport (line-delimited frames, same contract as the bus)

class SocketChannel:
    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.rfile = sock.makefile("r", encoding="utf-8", newline="\n")

    def send(self, m: Message) -> None:
        self.sock.sendall((encode_message(m) + "\n").encode("utf-8"))

    def recv(self) -> Message:
        line = self.rfile.readline()
        if not line:
            raise WireError("connection closed")
        return decode_message(line.rstrip("\n"))

    def close(self) -> None:
        try:
            self.rfile.close()
        finally:
            self.sock.close()


def loopback_pair() -> tuple[SocketChannel, SocketChannel]:
    a, b = socket.socketpair()
    return SocketChannel(a), SocketChannel(b)


# ---------------------------------------------------------------------------
# Knowledgebase state

class KBState:
    """Entries plus per-chain progress; the revision counter increments
    exactly when a progress index advances."""

    def __init__(self, entries: tuple[Formula, ...]):
        self.entries = entries
        self.progress: list[dict[Path, int]] = [{} for _ in entries]
        self.choices: list[dict[Path, int]] = [{} for _ in entries]
        self.revision = 0

    def provider_of(self, i: int) -> str | None:
        envs = set()

        def walk(n: Formula):
            if isinstance(n, (Cho, Seq)) and n.env:
                envs.add(n.env)
            if isinstance(n, Lit) and is_general(n.atom) and n.env:
                envs.add(n.env)
            for k in children(n):
                walk(k)

        walk(self.entries[i])
        return sorted(envs)[0] if envs else None

    def view(self, i: int) -> Formula:
        """The entry as currently standing: choices resolved, underlines at
        the progress indices."""
        prog, cho = self.progress[i], self.choices[i]

        def walk(n: Formula, path: Path) -> Formula:
            if isinstance(n, Cho) and path in cho:
                k = cho[path]
                return walk(n.kids[k], path + (k,))
            kids = children(n)
            if kids:
                n = hyper.with_kids(
                    n, tuple(walk(k, path + (j,)) for j, k in enumerate(kids)))
            if isinstance(n, Seq):
                n = replace(n, u=prog.get(path, 0))
            return n

        return walk(hyper.to_hyper(self.entries[i]), ())

    def head_atom(self, i: int) -> str:
        v = self.view(i)
        while isinstance(v, Seq):
            v = v.kids[v.u]
        return pretty(skeleton(v))

    def advance(self, i: int, path: Path) -> int:
        node = hyper.node_at(hyper.to_hyper(self.entries[i]), path)
        if not isinstance(node, Seq):
            raise IllegalMove(path, "switch on a non-sequential entry node")
        cur = self.progress[i].get(path, 0)
        if cur >= len(node.kids) - 1:
            raise IllegalMove(path, "entry chain exhausted")
        self.progress[i][path] = cur + 1
        self.revision += 1
        return self.revision

    def resolve(self, i: int, path: Path, k: int) -> None:
        node = hyper.node_at(hyper.to_hyper(self.entries[i]), path)
        if not isinstance(node, Cho) or not 0 <= k < len(node.kids):
            raise IllegalMove(path, "bad choice on entry node")
        self.choices[i].setdefault(path, k)


# ---------------------------------------------------------------------------
# Scheduler records

@dataclass
class QueryRecord:
    origin: str
    sid: str
    goal: Formula


@dataclass
class QSEntry:
    sid: str
    snapshot: int  # kb revision the query was last solved against


@dataclass
class Served:
    """A provider-side session for one incoming query."""

    record: QueryRecord
    session: Session
    entry_count: int
    answered: bool = False
    announced_answer: bool = False


@dataclass
class Binding:
    """Consumer side of a standing resource channel for one kb entry."""

    entry: int
    provider: str
    sid: str
    open: bool = True


def classify_solved(session: Session) -> str:
    """Temporarily solved while a machine-led chain retains switch moves."""
    return (TEMPORARILY if remaining_machine_switches(session.view)
            else COMPLETELY)


def super_script_step(script: list[tuple[int, Message]], tick: int) -> list[Message]:
    """Messages of a super-agent script due at the given tick, in order."""
    return [m for t, m in script if t == tick]


# ---------------------------------------------------------------------------
# Agents

class BaseAgent:
    kind = "regular"

    def __init__(self, spec: AgentSpec):
        self.spec = spec
        self.name = spec.name
        self.log = lambda direction, payload: None

    def on_message(self, msg: Message) -> list[Message]:
        raise NotImplementedError

    def step(self) -> tuple[str, list[Message]]:
        return "case3-idle", []


class SuperAgent(BaseAgent):
    """Unpredictable endpoint: records its games, moves only when scripted."""

    kind = "super"

    def __init__(self, spec: AgentSpec):
        super().__init__(spec)
        self.games: dict[str, tuple[str, Formula]] = {}  # sid -> (from, goal)
        self.sent: dict[str, str] = {}  # sid -> to
        self.seen: list[Message] = []
        self.counter = 0

    def on_message(self, msg: Message) -> list[Message]:
        self.seen.append(msg)
        if msg.kind == "QUERY":
            try:
                goal = parse_formula(msg.body)
            except ParseError:
                return [Message("FAIL", msg.session, body="bad-formula")]
            self.games[msg.session] = (msg.sender, goal)
        return []

    def new_sid(self) -> str:
        sid = f"{self.name}:{self.counter}"
        self.counter += 1
        return sid

    def script_query(self, to: str, text: str) -> Message:
        sid = self.new_sid()
        self.sent[sid] = to
        return Message("QUERY", sid, self.name, to, text)

    def script_move(self, peer: str, payload, path: Path = ()) -> Message:
        for sid, (origin, _goal) in self.games.items():
            if origin == peer:
                body = wire_move(Player.MACHINE, path, payload)
                return Message("MOVE", sid, self.name, peer, body)
        for sid, to in self.sent.items():
            if to == peer:
                body = wire_move(Player.ENV, path, payload)
                return Message("MOVE", sid, self.name, peer, body)
        raise ValueError(f"{self.name} has no session with {peer}")


class RegularAgent(BaseAgent):
    """Deductive agent: proves queries against its knowledgebase and plays
    the proofs; queues follow the income/temporarily-solved discipline."""

    kind = "regular"

    def __init__(self, spec: AgentSpec, *, budget: int = 200_000):
        super().__init__(spec)
        self.kb = KBState(spec.kb)
        self.budget = budget
        self.qi: deque[QueryRecord] = deque()
        self.qs: deque[QSEntry] = deque()
        self.sessions: dict[str, Served] = {}
        self.bindings: list[Binding | None] = [None] * len(spec.kb)
        self.by_sid: dict[str, Binding] = {}
        self.stash: dict[str, list[Message]] = {}  # moves that beat their session
        self.counter = 0

    # -- messaging ---------------------------------------------------------

    def new_sid(self) -> str:
        sid = f"{self.name}:{self.counter}"
        self.counter += 1
        return sid

    def on_message(self, msg: Message) -> list[Message]:
        if msg.kind == "QUERY":
            try:
                goal = parse_formula(msg.body)
            except ParseError:
                return [Message("FAIL", msg.session, self.name, msg.sender,
                                "bad-formula")]
            self.qi.append(QueryRecord(msg.sender, msg.session, goal))
            return []
        if msg.kind == "MOVE":
            return self._on_move(msg)
        if msg.kind == "OK":
            b = self.by_sid.get(msg.session)
            if b is not None:
                self.log("internal",
                         f"observes {b.provider} head={self.kb.head_atom(b.entry)}")
            return []
        if msg.kind in ("FAIL", "DONE"):
            b = self.by_sid.get(msg.session)
            if b is not None:
                b.open = False
                self.log("internal", f"binding {b.provider} closed ({msg.kind})")
            return []
        return []

    def _on_move(self, msg: Message) -> list[Message]:
        try:
            mv = parse_wire_move(msg.body)
        except ValueError:
            return [Message("FAIL", msg.session, self.name, msg.sender,
                            "bad-move")]
        if msg.session in self.sessions:
            return self._session_move(self.sessions[msg.session], mv)
        if msg.session in self.by_sid:
            return self._binding_move(self.by_sid[msg.session], msg, mv)
        if any(rec.sid == msg.session for rec in self.qi):
            self.stash.setdefault(msg.session, []).append(msg)
            return []
        return [Message("FAIL", msg.session, self.name, msg.sender,
                        "unknown-session")]

    def _session_move(self, served: Served, mv: Move) -> list[Message]:
        # consumer moves arrive in the provider frame as ⊥
        if mv.player is not Player.ENV:
            return [Message("FAIL", served.record.sid, self.name,
                            served.record.origin, "bad-player")]
        jpath = self._answer_prefix(served) + mv.path
        local = Move(Player.ENV, jpath, mv.payload)
        try:
            ems = served.session.deliver(local)
        except IllegalMove as e:
            return [Message("FAIL", served.record.sid, self.name,
                            served.record.origin, f"illegal:{e.reason.replace(' ', '-')}")]
        out = self._route_emissions(served, ems)
        self._announce_answer(served)
        return out

    def _binding_move(self, b: Binding, msg: Message, mv: Move) -> list[Message]:
        # provider moves arrive labelled ⊤ (the provider's own role)
        if mv.player is not Player.MACHINE:
            return [Message("FAIL", msg.session, self.name, msg.sender,
                            "bad-player")]
        out: list[Message] = []
        try:
            if isinstance(mv.payload, Switch):
                rev = self.kb.advance(b.entry, mv.path)
                self.log("internal",
                         f"kb entry {b.entry} advance rev={rev} "
                         f"head={self.kb.head_atom(b.entry)}")
            elif isinstance(mv.payload, Choose):
                self.kb.resolve(b.entry, mv.path, mv.payload.i)
                self.log("internal", f"kb entry {b.entry} choice")
        except IllegalMove as e:
            return [Message("FAIL", msg.session, self.name, msg.sender,
                            f"illegal:{e.reason.replace(' ', '-')}")]
        # forward into live sessions where the move is meaningful locally
        for served in self.sessions.values():
            jpath = (b.entry,) + mv.path
            local = Move(Player.ENV, jpath, mv.payload)
            if served.session.state.check(local) is None:
                ems = served.session.deliver(local)
                out.extend(self._route_emissions(served, ems))
                self._announce_answer(served)
        return out

    # -- scheduler -----------------------------------------------------------

    def step(self) -> tuple[str, list[Message]]:
        if self.qi:
            rec = self.qi.popleft()
            self.log("internal", f"case1 pop {rec.sid}")
            if rec.sid in self.sessions:
                return "case1", self._resolve_again(rec)
            return "case1", self._solve_fresh(rec)
        if self.qs:
            head = self.qs[0]
            if head.snapshot == self.kb.revision:
                self.log("internal", "case2-idle")
                return "case2-idle", []
            self.qs.popleft()
            served = self.sessions.get(head.sid)
            if served is None:
                return "case2-requeue", []
            self.log("internal", f"case2-requeue {head.sid}")
            self.qi.append(served.record)
            return "case2-requeue", []
        self.log("internal", "case3-idle")
        return "case3-idle", []

    def _kb_views(self) -> list[Formula]:
        return [self.kb.view(i) for i in range(len(self.kb.entries))]

    def _answer_prefix(self, served: Served) -> Path:
        return (served.entry_count,) if served.entry_count else ()

    def _compile(self, answer: Formula) -> Formula:
        views = self._kb_views()
        if not views:
            return answer
        return Par("or", tuple(negate(v) for v in views) + (answer,))

    def _solve_fresh(self, rec: QueryRecord) -> list[Message]:
        try:
            goal = annotate(rec.goal, rec.origin)
        except ParseError:
            return [Message("FAIL", rec.sid, self.name, rec.origin,
                            "env-switching")]
        j = self._compile(hyper.to_hyper(goal))
        res = prove(j, budget=self.budget, positioned=True)
        if not isinstance(res, Proof):
            reason = "unprovable" if isinstance(res, Unprovable) else "budget"
            self.log("internal", f"failed {rec.sid} {reason}")
            return [Message("FAIL", rec.sid, self.name, rec.origin, reason)]
        if not verify(res):
            return [Message("FAIL", rec.sid, self.name, rec.origin, "bad-proof")]
        served = Served(rec, Session(res, rec.sid), len(self.kb.entries))
        self.sessions[rec.sid] = served
        out = self._activate(served)
        out.extend(self._route_emissions(served, served.session.advance()))
        status = classify_solved(served.session)
        self.log("internal", f"solved {rec.sid} {status}")
        out.append(Message("OK", rec.sid, self.name, rec.origin))
        served.answered = True
        if status == TEMPORARILY:
            self.qs.append(QSEntry(rec.sid, self.kb.revision))
        self._announce_answer(served)
        for msg in self.stash.pop(rec.sid, []):
            out.extend(self._on_move(msg))
        return out

    def _activate(self, served: Served) -> list[Message]:
        """Open standing channels for annotated entries not yet bound."""
        out: list[Message] = []
        for i, entry in enumerate(self.kb.entries):
            provider = self.kb.provider_of(i)
            if provider is None:
                continue
            if self.bindings[i] is not None:
                continue
            sid = self.new_sid()
            b = Binding(i, provider, sid)
            self.bindings[i] = b
            self.by_sid[sid] = b
            out.append(Message("QUERY", sid, self.name, provider,
                               pretty(skeleton(entry))))
        return out

    def _route_emissions(self, served: Served,
                         ems: list[Emission]) -> list[Message]:
        out: list[Message] = []
        k = served.entry_count
        for em in ems:
            path = em.move.path
            if k and path[0] < k:
                b = self.bindings[path[0]]
                if b is None or not b.open:
                    continue
                body = wire_move(Player.ENV, path[1:], em.move.payload)
                out.append(Message("MOVE", b.sid, self.name, b.provider, body))
            else:
                skel = path[1:] if k else path
                body = wire_move(Player.MACHINE, skel, em.move.payload)
                out.append(Message("MOVE", served.record.sid, self.name,
                                   served.record.origin, body))
        return out

    def _announce_answer(self, served: Served) -> None:
        if served.announced_answer:
            return
        view = served.session.view
        answer = hyper.node_at(view, self._answer_prefix(served))
        if isinstance(answer, Lit):
            served.announced_answer = True
            self.log("internal",
                     f"answer {served.record.sid} {pretty(skeleton(answer))}")

    def _lift(self, n: Formula, entry: int) -> Formula:
        """Raise the view's underlines to the entry's confirmed progress, so
        provider pushes the session has not seen yet count as abandoned."""
        kids = children(n)
        if kids:
            n = hyper.with_kids(n, tuple(self._lift(k, entry) for k in kids))
        if isinstance(n, Seq) and n.addr is not None:
            done = self.kb.progress[entry].get(n.addr[1:], 0)
            if done > n.u:
                n = replace(n, u=done)
        return n

    def _resolve_again(self, rec: QueryRecord) -> list[Message]:
        served = self.sessions[rec.sid]
        view = served.session.view
        answer = hyper.node_at(view, self._answer_prefix(served))
        out: list[Message] = []
        k = served.entry_count
        entries = [self._lift(hyper.node_at(view, (i,)), i) for i in range(k)]

        def attempt(ans: Formula):
            # rebuilt from the live view: every node keeps its address
            j = Par("or", (*entries, ans), addr=()) if k else ans
            return prove(j, budget=self.budget, positioned=True)

        found: Proof | None = None
        pushes = 0
        if isinstance(answer, Seq):
            for t in range(answer.u, len(answer.kids)):
                res = attempt(replace(answer, u=t))
                if isinstance(res, Proof):
                    found, pushes = res, t - answer.u
                    break
        else:
            res = attempt(answer)
            if isinstance(res, Proof):
                found = res
        if found is None:
            self.log("internal", f"failed {rec.sid} update-broke-service")
            self.sessions.pop(rec.sid, None)
            return [Message("FAIL", rec.sid, self.name, rec.origin,
                            "update-broke-service")]
        for _ in range(pushes):
            body = wire_move(Player.MACHINE, (), Switch())
            out.append(Message("MOVE", rec.sid, self.name, rec.origin, body))
        served.session = Session(found, rec.sid)
        out.extend(self._route_emissions(served, served.session.advance()))
        status = classify_solved(served.session)
        self.log("internal", f"re-solved {rec.sid} {status}")
        if status == TEMPORARILY:
            self.qs.append(QSEntry(rec.sid, self.kb.revision))
        self._announce_answer(served)
        return out


class EtaAgent(BaseAgent):
    """Oracle-backed agent: trains a verdict table while idle, answers
    choice queries deterministically from it."""

    kind = "neural"

    def __init__(self, spec: AgentSpec):
        super().__init__(spec)
        self.oracle: dict[str, bool] = {}
        self.deferred: list[tuple[str, bool]] = []
        self.games: dict[str, tuple[str, Formula, Path]] = {}

    @property
    def busy(self) -> bool:
        return bool(self.games)

    def train(self, samples: list[tuple[str, bool]]) -> bool:
        """Memorize samples, later samples overwriting earlier ones.
        Deferred while a query is in flight."""
        if self.busy:
            self.deferred.extend(samples)
            return False
        for atom, verdict in samples:
            self.oracle[atom] = verdict
        return True

    def idle_tick(self) -> None:
        if not self.busy and self.deferred:
            pending, self.deferred = self.deferred, []
            self.train(pending)

    def on_message(self, msg: Message) -> list[Message]:
        if msg.kind == "QUERY":
            try:
                goal = parse_formula(msg.body)
            except ParseError:
                return [Message("FAIL", msg.session, self.name, msg.sender,
                                "bad-formula")]
            self.games[msg.session] = (msg.sender, goal, ())
            return self._advance(msg.session)
        if msg.kind == "MOVE":
            if msg.session not in self.games:
                return [Message("FAIL", msg.session, self.name, msg.sender,
                                "unknown-session")]
            try:
                mv = parse_wire_move(msg.body)
            except ValueError:
                return [Message("FAIL", msg.session, self.name, msg.sender,
                                "bad-move")]
            return self._env_move(msg.session, mv)
        return []

    def _fail(self, sid: str, reason: str) -> list[Message]:
        origin = self.games.pop(sid)[0]
        return [Message("FAIL", sid, self.name, origin, reason)]

    def _env_move(self, sid: str, mv: Move) -> list[Message]:
        origin, goal, pos = self.games[sid]
        if not isinstance(mv.payload, Choose):
            return self._fail(sid, "unsupported-move")
        node = hyper.node_at(goal, pos)
        if mv.path != pos or not isinstance(node, Cho) or node.who != ENV:
            return self._fail(sid, "unexpected-move")
        if not 0 <= mv.payload.i < len(node.kids):
            return self._fail(sid, "bad-component")
        self.games[sid] = (origin, goal, pos + (mv.payload.i,))
        return self._advance(sid)

    def _advance(self, sid: str) -> list[Message]:
        out: list[Message] = []
        while True:
            origin, goal, pos = self.games[sid]
            node = hyper.node_at(goal, pos)
            if isinstance(node, Lit):
                self.log("internal", f"answer {sid} {pretty(node)}")
                out.append(Message("OK", sid, self.name, origin))
                del self.games[sid]
                self.idle_tick()
                return out
            if isinstance(node, Cho) and node.who == MACH:
                pick = None
                for i, kid in enumerate(node.kids):
                    if not isinstance(kid, Lit):
                        return out + self._fail(sid, "unsupported-query")
                    verdict = self.oracle.get(kid.atom)
                    if verdict is None:
                        return out + self._fail(sid, "unknown-atom")
                    if verdict != kid.neg:
                        pick = i
                        break
                if pick is None:
                    return out + self._fail(sid, "no-true-disjunct")
                body = wire_move(Player.MACHINE, pos, Choose(pick))
                out.append(Message("MOVE", sid, self.name, origin, body))
                self.games[sid] = (origin, goal, pos + (pick,))
                continue
            if isinstance(node, Cho):
                return out  # environment's choice: wait
            return out + self._fail(sid, "unsupported-query")


def make_agent(spec: AgentSpec, **kw) -> BaseAgent:
    if spec.kind == "super":
        return SuperAgent(spec)
    if spec.kind == "neural":
        return EtaAgent(spec)
    return RegularAgent(spec, **kw)
