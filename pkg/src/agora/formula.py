"""Syntax of the query language: parsing, negation normal form, agent annotations.

The internal form is negation normal form (NNF): negation sits only on
literals, implication is rewritten away at parse time, and an annotation
``^name`` is distributed onto every node of the annotated subformula.

Surface syntax (tightest binding first)::

    ~      negation (literals only after NNF)
    # @    sequential chains, environment-led / machine-led
    & +    choice, by the environment / by the machine
    /\ \/  parallel and / or
    ->     implication, right associative, becomes ~A \/ B
    ^name  agent annotation on an atom or a parenthesised group
    %      line comment

Atoms starting with a lowercase letter are elementary (fixed truth value);
uppercase atoms are general (stand for arbitrary games).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

Path = tuple[int, ...]

ENV = "env"    # environment side: & chooses, # leads switches
MACH = "mach"  # machine side: + chooses, @ leads switches


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class AgentFileError(ValueError):
    pass


@dataclass(frozen=True)
class Lit:
    atom: str
    neg: bool = False
    env: str | None = None
    addr: Path | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Hyb:
    """Hybrid literal: a general atom paired with its elementary witness."""

    gen: str
    elem: str
    neg: bool = False
    env: str | None = None
    addr: Path | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Par:
    op: str  # "and" | "or"
    kids: tuple
    env: str | None = None
    addr: Path | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Cho:
    who: str  # ENV for &, MACH for +
    kids: tuple
    env: str | None = None
    addr: Path | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Seq:
    who: str  # leader: ENV for #, MACH for @
    kids: tuple
    u: int = 0  # underlined component
    env: str | None = None
    addr: Path | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Const:
    val: bool  # True = top, False = bottom
    env: str | None = None
    addr: Path | None = field(default=None, compare=False, repr=False)


Formula = Lit | Hyb | Par | Cho | Seq | Const

_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9_]*")


def is_general(atom: str) -> bool:
    return atom[0].isupper()


def children(f: Formula) -> tuple:
    return f.kids if isinstance(f, (Par, Cho, Seq)) else ()


def with_kids(f: Formula, kids: tuple) -> Formula:
    return replace(f, kids=kids)


def _dual(who: str) -> str:
    return MACH if who == ENV else ENV


def negate(f: Formula) -> Formula:
    """NNF negation: dual for every operator, sign flip on literals."""
    if isinstance(f, Lit):
        return replace(f, neg=not f.neg)
    if isinstance(f, Hyb):
        return replace(f, neg=not f.neg)
    if isinstance(f, Const):
        return replace(f, val=not f.val)
    if isinstance(f, Par):
        return Par("or" if f.op == "and" else "and",
                   tuple(negate(k) for k in f.kids), f.env, f.addr)
    if isinstance(f, Cho):
        return Cho(_dual(f.who), tuple(negate(k) for k in f.kids), f.env, f.addr)
    if isinstance(f, Seq):
        return Seq(_dual(f.who), tuple(negate(k) for k in f.kids), f.u, f.env, f.addr)
    raise TypeError(f)


def skeleton(f: Formula) -> Formula:
    """Erase every environment annotation."""
    if isinstance(f, (Lit, Hyb, Const)):
        return replace(f, env=None)
    return replace(f, env=None, kids=tuple(skeleton(k) for k in f.kids))


def annotate(f: Formula, name: str) -> Formula:
    """Distribute ``^name`` onto every node of f.

    Rejects env-switching: a node already carrying a different annotation.
    """
    if f.env is not None and f.env != name:
        raise ParseError(
            f"environment annotation ^{name} conflicts with inner ^{f.env}")
    if isinstance(f, (Lit, Hyb, Const)):
        return replace(f, env=name)
    return replace(f, env=name, kids=tuple(annotate(k, name) for k in f.kids))


def compile_query(kb: list[Formula], q: Formula) -> Formula:
    """NNF of (F1 /\\ ... /\\ Fk) -> q, i.e. ~F1 \\/ ... \\/ ~Fk \\/ q.

    Child i is the negated i-th entry and the query sits last, so callers
    can address the parts of the compiled session formula positionally.
    """
    if not kb:
        return q
    return Par("or", tuple(negate(e) for e in kb) + (q,))


# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"""(?P<ws>[ \t\r]+)
      | (?P<nl>\n)
      | (?P<comment>%[^\n]*)
      | (?P<name>[A-Za-z][A-Za-z0-9_]*)
      | (?P<op>/\\|\\/|->|[~&+\#@^().])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # "name" | "op"
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        tok = m.group()
        if kind == "nl":
            line += 1
            col = 1
        else:
            if kind in ("name", "op"):
                toks.append(_Tok(kind, tok, line, col))
            col += len(tok)
        pos = m.end()
    return toks


class _Parser:
    def __init__(self, toks: list[_Tok], end_line: int = 0):
        self.toks = toks
        self.pos = 0
        self.end_line = end_line

    def peek(self) -> _Tok | None:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def take(self) -> _Tok:
        t = self.peek()
        if t is None:
            raise ParseError("unexpected end of input", self.end_line, 0)
        self.pos += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.take()
        if t.text != text:
            raise ParseError(f"expected {text!r}, found {t.text!r}", t.line, t.col)
        return t

    # precedence ladder -----------------------------------------------------

    def formula(self) -> Formula:
        f = self.impl()
        t = self.peek()
        if t is not None:
            raise ParseError(f"unexpected token {t.text!r}", t.line, t.col)
        return f

    def impl(self) -> Formula:
        left = self.level(("/\\", "\\/"))
        t = self.peek()
        if t is not None and t.text == "->":
            self.take()
            right = self.impl()
            return self._merge_or(negate(left), right)
        return left

    def _merge_or(self, a: Formula, b: Formula) -> Formula:
        kids: list[Formula] = []
        for p in (a, b):
            if isinstance(p, Par) and p.op == "or" and p.env is None:
                kids.extend(p.kids)
            else:
                kids.append(p)
        return Par("or", tuple(kids))

    _LEVELS = {
        ("/\\", "\\/"): ("&", "+"),
        ("&", "+"): ("#", "@"),
        ("#", "@"): None,
    }

    def level(self, ops: tuple[str, str]) -> Formula:
        below = self._LEVELS[ops]
        sub = (lambda: self.level(below)) if below else self.unary
        node = sub()
        while True:
            t = self.peek()
            if t is None or t.text not in ops:
                return node
            op = self.take().text
            right = sub()
            node = self._combine(ops, op, node, right)

    def _combine(self, ops, op, left, right) -> Formula:
        if ops == ("/\\", "\\/"):
            tag = "and" if op == "/\\" else "or"
            mk, matches = (lambda ks: Par(tag, ks)), (
                lambda n: isinstance(n, Par) and n.op == tag)
        elif ops == ("&", "+"):
            who = ENV if op == "&" else MACH
            mk, matches = (lambda ks: Cho(who, ks)), (
                lambda n: isinstance(n, Cho) and n.who == who)
        else:
            who = ENV if op == "#" else MACH
            mk, matches = (lambda ks: Seq(who, ks)), (
                lambda n: isinstance(n, Seq) and n.who == who)
        kids: list[Formula] = []
        for part in (left, right):
            if matches(part) and part.env is None:
                kids.extend(part.kids)
            else:
                kids.append(part)
        return mk(tuple(kids))

    def unary(self) -> Formula:
        t = self.peek()
        if t is not None and t.text == "~":
            self.take()
            return negate(self.unary())
        return self.primary()

    def primary(self) -> Formula:
        t = self.take()
        if t.kind == "name":
            f: Formula = Lit(t.text)
        elif t.text == "(":
            f = self.impl()
            self.expect(")")
        else:
            raise ParseError(f"unexpected token {t.text!r}", t.line, t.col)
        nxt = self.peek()
        if nxt is not None and nxt.text == "^":
            self.take()
            name = self.take()
            if name.kind != "name":
                raise ParseError("expected agent name after '^'", name.line, name.col)
            try:
                f = annotate(f, name.text)
            except ParseError as e:
                raise ParseError(e.message, name.line, name.col) from None
        return f


def parse_formula(text: str) -> Formula:
    toks = _tokenize(text)
    if not toks:
        raise ParseError("empty formula", 1, 1)
    return _Parser(toks, end_line=toks[-1].line).formula()


# ---------------------------------------------------------------------------
# Pretty printing

_SEPS = {"and": "/\\", "or": "\\/"}


def _op_info(f: Formula) -> tuple[str, int]:
    if isinstance(f, Par):
        return _SEPS[f.op], 1
    if isinstance(f, Cho):
        return ("&" if f.who == ENV else "+"), 2
    return ("#" if f.who == ENV else "@"), 3


def pretty(f: Formula) -> str:
    """Surface rendering; parse_formula(pretty(f)) is structurally f."""
    return _render(f, 0, None)


def _render(f: Formula, parent_prec: int, env_ctx: str | None) -> str:
    tag = f.env is not None and f.env != env_ctx
    ctx = f.env if tag else env_ctx
    if isinstance(f, Lit):
        return ("~" if f.neg else "") + f.atom + (f"^{f.env}" if tag else "")
    if isinstance(f, Hyb):
        return ("~" if f.neg else "") + f"{f.gen}_{f.elem}" + (f"^{f.env}" if tag else "")
    if isinstance(f, Const):
        return "$T" if f.val else "$F"
    sep, prec = _op_info(f)
    body = f" {sep} ".join(_render(k, prec, ctx) for k in f.kids)
    if tag:
        return f"({body})^{f.env}"
    if prec <= parent_prec:
        return f"({body})"
    return body


# ---------------------------------------------------------------------------
# Agent files

AGENT_KINDS = ("regular", "super", "neural")


@dataclass(frozen=True)
class AgentSpec:
    name: str
    kind: str
    kb: tuple[Formula, ...] = ()


def _statements(text: str) -> list[list[_Tok]]:
    toks = _tokenize(text)
    out, cur = [], []
    for t in toks:
        if t.text == "." and t.kind == "op":
            out.append(cur)
            cur = []
        else:
            cur.append(t)
    if cur:
        t = cur[0]
        raise AgentFileError(
            f"{t.line}:{t.col}: statement not terminated by '.'")
    return out


def _check_kb_entry(f: Formula, where: str) -> None:
    if isinstance(f, (Cho, Seq)) and f.env is None:
        raise AgentFileError(
            f"{where}: choice/sequential operator without an agent annotation")
    if isinstance(f, Lit) and is_general(f.atom) and f.env is None:
        raise AgentFileError(
            f"{where}: general atom {f.atom} without an agent annotation")
    for k in children(f):
        _check_kb_entry(k, where)


def parse_agent_file(text: str) -> AgentSpec:
    """Parse one agent file: ``agent [super|neural] <name>.`` plus kb entries."""
    stmts = _statements(text)
    if not stmts:
        raise AgentFileError("empty agent file")
    name: str | None = None
    kind = "regular"
    kb: list[Formula] = []
    for stmt in stmts:
        if not stmt:
            raise AgentFileError("empty statement")
        if stmt[0].kind == "name" and stmt[0].text == "agent":
            if name is not None:
                t = stmt[0]
                raise AgentFileError(
                    f"{t.line}:{t.col}: duplicate agent declaration")
            words = stmt[1:]
            if len(words) == 1:
                pass
            elif len(words) == 2:
                if words[0].text not in ("super", "neural"):
                    raise AgentFileError(
                        f"{words[0].line}:{words[0].col}: unknown agent kind "
                        f"{words[0].text!r}")
                kind = words[0].text
            else:
                t = stmt[0]
                raise AgentFileError(
                    f"{t.line}:{t.col}: malformed agent declaration")
            last = words[-1]
            if last.kind != "name":
                raise AgentFileError(
                    f"{last.line}:{last.col}: expected agent name")
            name = last.text
        else:
            if name is None:
                t = stmt[0]
                raise AgentFileError(
                    f"{t.line}:{t.col}: knowledgebase entry before agent "
                    "declaration")
            f = _Parser(list(stmt), end_line=stmt[-1].line).formula()
            _check_kb_entry(f, f"{stmt[0].line}:{stmt[0].col}")
            kb.append(f)
    assert name is not None
    return AgentSpec(name, kind, tuple(kb))
