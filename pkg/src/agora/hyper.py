"""Hyperformulas: underlines, hybrid atoms, occurrence classes, stability.

A hyperformula is an NNF tree in which every sequential chain carries one
underlined component (``Seq.u``) and literals may be hybrid (``Hyb``): a
general atom paired with a fresh elementary witness.  The rule-application
primitives here (`apply_choose`, `advance_underline`, `hybridize`) are the
syntactic halves of the four proof rules.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import product

from .formula import (
    Cho, Const, ENV, Formula, Hyb, Lit, MACH, Par, Path, Seq,
    children, is_general, with_kids,
)

ACTIVE = "active"
ABANDONED = "abandoned"
PENDING = "pending"  # strictly right of an underline


@dataclass(frozen=True)
class Occ:
    path: Path            # position within the hyperformula tree
    node: Formula
    surface: bool
    activity: str         # ACTIVE | ABANDONED | PENDING

    @property
    def active(self) -> bool:
        return self.activity == ACTIVE

    @property
    def abandoned(self) -> bool:
        return self.activity == ABANDONED


def stamp(f: Formula, path: Path = ()) -> Formula:
    """Stamp every node with its address, the stable identity used by moves."""
    kids = children(f)
    if not kids:
        return replace(f, addr=path)
    return replace(f, addr=path,
                   kids=tuple(stamp(k, path + (i,)) for i, k in enumerate(kids)))


def to_hyper(f: Formula) -> Formula:
    """Initial hyperformula of a plain formula: every underline on the head."""
    if isinstance(f, Hyb):
        raise ValueError("plain formula expected, found a hybrid atom")
    kids = tuple(to_hyper(k) for k in children(f))
    if isinstance(f, Seq):
        return replace(f, u=0, kids=kids)
    if kids:
        return with_kids(f, kids)
    return f


def node_at(h: Formula, path: Path) -> Formula:
    n = h
    for i in path:
        kids = children(n)
        if i >= len(kids):
            raise ValueError(f"no node at path {path}")
        n = kids[i]
    return n


def replace_at(h: Formula, path: Path, new: Formula) -> Formula:
    if not path:
        return new
    kids = list(children(h))
    kids[path[0]] = replace_at(kids[path[0]], path[1:], new)
    return with_kids(h, tuple(kids))


def _classify(in_choice: bool, seq_ctx: list[tuple[int, int]]) -> tuple[bool, str]:
    # seq_ctx holds (component index, underline index) per enclosing chain
    surface = not in_choice and all(ci <= u for ci, u in seq_ctx)
    if all(ci == u for ci, u in seq_ctx):
        act = ACTIVE
    elif any(ci < u for ci, u in seq_ctx):
        act = ABANDONED
    else:
        act = PENDING
    return surface, act


def occurrences(h: Formula, want=None) -> list[Occ]:
    """All occurrences matching the node filter, in left-to-right order."""
    out: list[Occ] = []

    def walk(n: Formula, path: Path, in_choice: bool, ctx: list):
        surface, act = _classify(in_choice, ctx)
        if want is None or want(n):
            out.append(Occ(path, n, surface, act))
        if isinstance(n, (Par, Cho, Seq)):
            deeper_choice = in_choice or isinstance(n, Cho)
            for i, k in enumerate(n.kids):
                sub = ctx + [(i, n.u)] if isinstance(n, Seq) else ctx
                walk(k, path + (i,), deeper_choice, sub)

    walk(h, (), False, [])
    return out


def occurrence_at(h: Formula, path: Path) -> Occ:
    n = h
    in_choice = False
    ctx: list[tuple[int, int]] = []
    for i in path:
        if isinstance(n, Cho):
            in_choice = True
        if isinstance(n, Seq):
            ctx.append((i, n.u))
        n = children(n)[i]
    surface, act = _classify(in_choice, ctx)
    return Occ(path, n, surface, act)


def find_addr(h: Formula, addr: Path) -> Occ | None:
    """Occurrence whose node carries the given stable address, if present."""
    for occ in occurrences(h):
        if occ.node.addr == addr:
            return occ
    return None


# ---------------------------------------------------------------------------
# Capitalization, elementarization, stability

def capitalization(h: Formula) -> Formula:
    """Replace every sequential chain by its underlined component."""
    if isinstance(h, Seq):
        return capitalization(h.kids[h.u])
    kids = children(h)
    if kids:
        return with_kids(h, tuple(capitalization(k) for k in kids))
    return h


def _elem(n: Formula) -> Formula:
    # operates on a capitalization; never descends into choice material
    if isinstance(n, Cho):
        return Const(n.who == ENV)
    if isinstance(n, Lit):
        if is_general(n.atom):
            return Const(False)
        return Lit(n.atom, n.neg)
    if isinstance(n, Hyb):
        return Lit(n.elem, n.neg)
    if isinstance(n, Const):
        return Const(n.val)
    if isinstance(n, Par):
        return Par(n.op, tuple(_elem(k) for k in n.kids))
    raise AssertionError("sequential node survived capitalization")


def elementarization(h: Formula) -> Formula:
    """Classical core: chains to underlined components, choices to constants,
    general literals to bottom, hybrids to their elementary witness."""
    return _elem(capitalization(h))


def _eval3(n: Formula, a: dict[str, bool]):
    if isinstance(n, Const):
        return n.val
    if isinstance(n, Lit):
        v = a.get(n.atom)
        if v is None:
            return None
        return v != n.neg
    want_all = n.op == "and"
    pending = False
    for k in n.kids:
        v = _eval3(k, a)
        if v is None:
            pending = True
        elif v != want_all:
            return not want_all
    return None if pending else want_all


def _atoms_of(e: Formula, acc: set[str]) -> None:
    if isinstance(e, Lit):
        acc.add(e.atom)
    for k in children(e):
        _atoms_of(k, acc)


def _falsifiable(e: Formula, a: dict[str, bool], atoms: list[str]) -> bool:
    v = _eval3(e, a)
    if v is not None:
        return not v
    x = next(x for x in atoms if x not in a)
    return (_falsifiable(e, {**a, x: False}, atoms)
            or _falsifiable(e, {**a, x: True}, atoms))


def is_tautology(e: Formula) -> bool:
    """Backtracking search with short-circuit propagation."""
    atoms: set[str] = set()
    _atoms_of(e, atoms)
    return not _falsifiable(e, {}, sorted(atoms))


def tautology_by_table(e: Formula) -> bool:
    """Exhaustive truth-table oracle; kept independent of is_tautology."""
    atoms: set[str] = set()
    _atoms_of(e, atoms)
    names = sorted(atoms)

    def ev(n: Formula, a: dict[str, bool]) -> bool:
        if isinstance(n, Const):
            return n.val
        if isinstance(n, Lit):
            return a[n.atom] != n.neg
        vs = [ev(k, a) for k in n.kids]
        return all(vs) if n.op == "and" else any(vs)

    for bits in product((False, True), repeat=len(names)):
        if not ev(e, dict(zip(names, bits))):
            return False
    return True


def is_stable(h: Formula) -> bool:
    return is_tautology(elementarization(h))


# ---------------------------------------------------------------------------
# Balance and widowhood of hybrid pairs

def _hybrid_groups(h: Formula) -> dict[tuple[str, str], list[Occ]]:
    groups: dict[tuple[str, str], list[Occ]] = {}
    for occ in occurrences(h, lambda n: isinstance(n, Hyb)):
        groups.setdefault((occ.node.gen, occ.node.elem), []).append(occ)
    return groups


def is_balanced(h: Formula) -> bool:
    groups = _hybrid_groups(h)
    lit_atoms: set[str] = set()
    for occ in occurrences(h, lambda n: isinstance(n, Lit)):
        lit_atoms.add(occ.node.atom)
    elems = [q for (_, q) in groups]
    for (gen, q), occs in groups.items():
        if len(occs) != 2:
            return False
        if {occs[0].node.neg, occs[1].node.neg} != {False, True}:
            return False
        if not all(o.surface for o in occs):
            return False
        if q in lit_atoms:
            return False
        if elems.count(q) > 1:
            return False
    return True


def widowed(h: Formula, occ: Occ) -> bool:
    """True iff the twin of an active hybrid occurrence is abandoned."""
    if not isinstance(occ.node, Hyb):
        raise ValueError("occurrence is not a hybrid literal")
    if not occ.active:
        raise ValueError("occurrence is not active")
    key = (occ.node.gen, occ.node.elem)
    twins = [o for o in _hybrid_groups(h).get(key, []) if o.path != occ.path]
    if len(twins) != 1:
        raise ValueError("hybrid pair is not balanced")
    return twins[0].abandoned


# ---------------------------------------------------------------------------
# Rule-application primitives

def apply_choose(h: Formula, path: Path, i: int) -> Formula:
    occ = occurrence_at(h, path)
    node = occ.node
    if not (isinstance(node, Cho) and node.who == MACH
            and occ.active and occ.surface):
        raise ValueError(f"path {path} is not an active surface machine choice")
    if not 0 <= i < len(node.kids):
        raise ValueError(f"component {i} out of range")
    return replace_at(h, path, node.kids[i])


def advance_underline(h: Formula, path: Path) -> Formula:
    occ = occurrence_at(h, path)
    node = occ.node
    if not (isinstance(node, Seq) and occ.active and occ.surface):
        raise ValueError(f"path {path} is not an active surface chain")
    if node.u >= len(node.kids) - 1:
        raise ValueError("underline already on the last component")
    return replace_at(h, path, replace(node, u=node.u + 1))


def hybridize(h: Formula, pos_path: Path, neg_path: Path, fresh: str) -> Formula:
    pos, neg = occurrence_at(h, pos_path), occurrence_at(h, neg_path)
    for occ, want_neg in ((pos, False), (neg, True)):
        n = occ.node
        if not (isinstance(n, Lit) and is_general(n.atom)):
            raise ValueError(f"path {occ.path} is not a general literal")
        if n.neg != want_neg:
            raise ValueError("need one positive and one negative occurrence")
        if not (occ.active and occ.surface):
            raise ValueError(f"occurrence at {occ.path} is not active surface")
    if pos.node.atom != neg.node.atom:
        raise ValueError("occurrences name different atoms")
    if is_general(fresh):
        raise ValueError("witness atom must be elementary")
    used: set[str] = set()
    for occ in occurrences(h, lambda n: isinstance(n, (Lit, Hyb))):
        if isinstance(occ.node, Lit):
            used.add(occ.node.atom)
        else:
            used.add(occ.node.elem)
    if fresh in used:
        raise ValueError(f"witness atom {fresh} already occurs")
    out = h
    for occ in (pos, neg):
        n = occ.node
        out = replace_at(out, occ.path,
                         Hyb(n.atom, fresh, n.neg, n.env, n.addr))
    return out


# ---------------------------------------------------------------------------
# Debug rendering: underline brackets and hybrid witnesses

from .formula import _op_info  # noqa: E402


def show(h: Formula) -> str:
    return _show(h, 0, None)


def _show(f: Formula, parent_prec: int, env_ctx: str | None) -> str:
    tag = f.env is not None and f.env != env_ctx
    ctx = f.env if tag else env_ctx
    if isinstance(f, Lit):
        return ("~" if f.neg else "") + f.atom + (f"^{f.env}" if tag else "")
    if isinstance(f, Hyb):
        return ("~" if f.neg else "") + f"{f.gen}_{f.elem}" + (f"^{f.env}" if tag else "")
    if isinstance(f, Const):
        return "$T" if f.val else "$F"
    sep, prec = _op_info(f)
    parts = []
    for i, k in enumerate(f.kids):
        s = _show(k, prec, ctx)
        if isinstance(f, Seq) and i == f.u:
            s = f"[{s}]"
        parts.append(s)
    body = f" {sep} ".join(parts)
    if tag:
        return f"({body})^{f.env}"
    if prec <= parent_prec:
        return f"({body})"
    return body
