"""Backward proof search over hyperformulas, plus independent verifiers.

A proof node records its conclusion, the rule that concluded it, the rule's
action detail (stable addresses, so an executor can replay the strategy on a
live game), and the premises.  `verify` rechecks a proof bottom-up against
the hyperformula rules; `verify_plain` checks line-style derivations in the
underline-free calculus.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .formula import (
    Cho, ENV, Formula, Hyb, Lit, MACH, Path, Seq, children, is_general,
)
from . import hyper
from .hyper import (
    Occ, advance_underline, apply_choose, hybridize, is_balanced, is_stable,
    occurrences, show, stamp, to_hyper,
)

WAIT, CHOOSE, SWITCH, MATCH = "wait", "choose", "switch", "match"


@dataclass(frozen=True)
class Proof:
    conclusion: Formula
    rule: str
    action: tuple
    premises: tuple["Proof", ...]


@dataclass(frozen=True)
class Unprovable:
    explored: int


@dataclass(frozen=True)
class ProofTimeout:
    explored: int


class _BudgetExceeded(Exception):
    pass


def _path_of_addr(h: Formula, addr: Path) -> Path:
    occ = hyper.find_addr(h, addr)
    if occ is None:
        raise ValueError(f"address {addr} not present")
    return occ.path


def _wait_actions(h: Formula) -> list[tuple[tuple, Formula]]:
    """Premises of a Wait conclusion, paired with the move generating each."""
    out: list[tuple[tuple, Formula]] = []
    seen: set[str] = set()
    for occ in occurrences(h):
        n = occ.node
        if not (occ.active and occ.surface):
            continue
        if isinstance(n, Cho) and n.who == ENV:
            for i in range(len(n.kids)):
                prem = hyper.replace_at(h, occ.path, n.kids[i])
                key = canon(prem)
                if key not in seen:
                    seen.add(key)
                    out.append((("choice", n.addr, i), prem))
        elif isinstance(n, Seq) and n.who == ENV and n.u < len(n.kids) - 1:
            prem = advance_underline(h, occ.path)
            key = canon(prem)
            if key not in seen:
                seen.add(key)
                out.append((("advance", n.addr), prem))
    return out


def wait_premises(h: Formula) -> list[Formula]:
    return [prem for _, prem in _wait_actions(h)]


def canon(h: Formula) -> str:
    """Memoization key: rendering with witness atoms renamed in discovery order."""
    names: dict[str, str] = {}

    def rename(n: Formula) -> Formula:
        if isinstance(n, Hyb):
            if n.elem not in names:
                names[n.elem] = f"h{len(names)}"
            return Hyb(n.gen, names[n.elem], n.neg, n.env)
        kids = children(n)
        if kids:
            return hyper.with_kids(n, tuple(rename(k) for k in kids))
        return n

    return show(rename(h))


def _addr_key(h: Formula) -> str:
    parts: list[str] = []

    def walk(n: Formula):
        parts.append(str(n.addr))
        for k in children(n):
            walk(k)

    walk(h)
    return canon(h) + "|" + ",".join(parts)


def measure(h: Formula) -> tuple[int, int, int]:
    """(general literals, choice nodes, underline slack): strictly decreases
    along every premise edge, in lexicographic order."""
    g = c = s = 0

    def walk(n: Formula):
        nonlocal g, c, s
        if isinstance(n, Lit) and is_general(n.atom):
            g += 1
        elif isinstance(n, Cho):
            c += 1
        elif isinstance(n, Seq):
            s += len(n.kids) - 1 - n.u
        for k in children(n):
            walk(k)

    walk(h)
    return g, c, s


def _fresh_name(used: set[str], counter: list[int]) -> str:
    while True:
        counter[0] += 1
        name = f"q{counter[0]}"
        if name not in used:
            return name


def _machine_steps(h: Formula, used_atoms: set[str], counter: list[int]):
    occs = occurrences(h)
    for occ in occs:
        n = occ.node
        if not (occ.active and occ.surface):
            continue
        if isinstance(n, Cho) and n.who == MACH:
            for i in range(len(n.kids)):
                yield CHOOSE, (n.addr, i), hyper.replace_at(h, occ.path, n.kids[i])
        elif isinstance(n, Seq) and n.who == MACH and n.u < len(n.kids) - 1:
            yield SWITCH, (n.addr,), advance_underline(h, occ.path)
    generals: dict[str, tuple[list[Occ], list[Occ]]] = {}
    for occ in occs:
        n = occ.node
        if (isinstance(n, Lit) and is_general(n.atom)
                and occ.active and occ.surface):
            generals.setdefault(n.atom, ([], []))[1 if n.neg else 0].append(occ)
    for atom in sorted(generals):
        pos, neg = generals[atom]
        for p in pos:
            for q in neg:
                fresh = _fresh_name(used_atoms, counter)
                counter[0] -= 1  # name reserved only if this branch is taken
                yield (MATCH, (p.node.addr, q.node.addr, fresh),
                       hybridize(h, p.path, q.path, fresh))


def _collect_atoms(h: Formula) -> set[str]:
    used: set[str] = set()

    def walk(n: Formula):
        if isinstance(n, Lit):
            used.add(n.atom)
        elif isinstance(n, Hyb):
            used.add(n.gen)
            used.add(n.elem)
        for k in children(n):
            walk(k)

    walk(h)
    return used


def prove(goal: Formula, *, budget: int | None = None,
          positioned: bool = False):
    """Decide the goal; a Proof on success, Unprovable with the size of the
    exhausted search space otherwise, ProofTimeout if the step budget runs out.

    With positioned=True the goal's existing underlines are kept, and so are
    its addresses if it is already stamped (used to re-solve a live session
    against an advanced knowledgebase view without renumbering its moves).
    """
    if positioned:
        h = goal if goal.addr is not None else stamp(goal)
    else:
        h = stamp(to_hyper(goal))
    fail: set[str] = set()
    done: dict[str, Proof] = {}
    steps = [0]
    used_atoms = _collect_atoms(h)
    counter = [0]

    def search(g: Formula) -> Proof | None:
        steps[0] += 1
        if budget is not None and steps[0] > budget:
            raise _BudgetExceeded
        key = canon(g)
        if key in fail:
            return None
        akey = _addr_key(g)
        if akey in done:
            return done[akey]
        # Wait first: the patient strategy spends no switch or choice the
        # environment did not force, which is what the strategies the proofs
        # get executed as must look like.  Machine rules are the fallback.
        if is_stable(g):
            acts = _wait_actions(g)
            subs = []
            for _, prem in acts:
                sub = search(prem)
                if sub is None:
                    break
                subs.append(sub)
            else:
                proof = Proof(g, WAIT, tuple(a for a, _ in acts), tuple(subs))
                done[akey] = proof
                return proof
        for rule, action, prem in _machine_steps(g, used_atoms, counter):
            if rule == MATCH:
                counter[0] += 1
            sub = search(prem)
            if sub is not None:
                proof = Proof(g, rule, action, (sub,))
                done[akey] = proof
                return proof
        fail.add(key)
        return None

    try:
        found = search(h)
    except _BudgetExceeded:
        return ProofTimeout(steps[0])
    if found is None:
        return Unprovable(steps[0])
    return found


def rule_counts(p: Proof) -> Counter:
    c: Counter = Counter({p.rule: 1})
    for q in p.premises:
        c.update(rule_counts(q))
    return c


def proof_nodes(p: Proof) -> int:
    return 1 + sum(proof_nodes(q) for q in p.premises)


# ---------------------------------------------------------------------------
# Verification of hyperformula proofs

def verify(p: Proof) -> bool:
    h = p.conclusion
    if not is_balanced(h):
        return False
    try:
        if p.rule == WAIT:
            if not is_stable(h):
                return False
            want = sorted(canon(prem) for _, prem in _wait_actions(h))
            got = sorted(canon(q.conclusion) for q in p.premises)
            if want != got:
                return False
        elif p.rule == CHOOSE:
            addr, i = p.action
            prem = apply_choose(h, _path_of_addr(h, addr), i)
            if len(p.premises) != 1 or canon(prem) != canon(p.premises[0].conclusion):
                return False
        elif p.rule == SWITCH:
            (addr,) = p.action
            prem = advance_underline(h, _path_of_addr(h, addr))
            if len(p.premises) != 1 or canon(prem) != canon(p.premises[0].conclusion):
                return False
        elif p.rule == MATCH:
            pos, neg, fresh = p.action
            prem = hybridize(h, _path_of_addr(h, pos), _path_of_addr(h, neg), fresh)
            if len(p.premises) != 1 or canon(prem) != canon(p.premises[0].conclusion):
                return False
        else:
            return False
    except ValueError:
        return False
    return all(verify(q) for q in p.premises)


# ---------------------------------------------------------------------------
# Verification of plain line-style derivations (no underlines, no hybrids)

def _plain_ok(f: Formula) -> bool:
    if isinstance(f, Hyb):
        return False
    if isinstance(f, Seq) and f.u != 0:
        return False
    return all(_plain_ok(k) for k in children(f))


def _tail_chain(n: Seq) -> Formula:
    if len(n.kids) == 2:
        return n.kids[1]
    return Seq(n.who, n.kids[1:], 0, n.env)


def _plain_wait_premises(f: Formula) -> list[Formula]:
    out: list[Formula] = []
    seen: set[str] = set()
    for occ in occurrences(f):
        n = occ.node
        if not (occ.active and occ.surface):
            continue
        if isinstance(n, Cho) and n.who == ENV:
            for kid in n.kids:
                prem = hyper.replace_at(f, occ.path, kid)
                if canon(prem) not in seen:
                    seen.add(canon(prem))
                    out.append(prem)
        elif isinstance(n, Seq) and n.who == ENV:
            prem = hyper.replace_at(f, occ.path, _tail_chain(n))
            if canon(prem) not in seen:
                seen.add(canon(prem))
                out.append(prem)
    return out


def _plain_machine_premises(f: Formula, rule: str) -> list[Formula]:
    out: list[Formula] = []
    for occ in occurrences(f):
        n = occ.node
        if not (occ.active and occ.surface):
            continue
        if rule == CHOOSE and isinstance(n, Cho) and n.who == MACH:
            out.extend(hyper.replace_at(f, occ.path, kid) for kid in n.kids)
        elif rule == SWITCH and isinstance(n, Seq) and n.who == MACH:
            out.append(hyper.replace_at(f, occ.path, _tail_chain(n)))
    return out


def _plain_match_premises(f: Formula) -> list[Formula]:
    used = _collect_atoms(f)
    fresh = _fresh_name(set(used), [0])
    out: list[Formula] = []
    groups: dict[str, tuple[list[Occ], list[Occ]]] = {}
    for occ in occurrences(f):
        n = occ.node
        if (isinstance(n, Lit) and is_general(n.atom)
                and occ.active and occ.surface):
            groups.setdefault(n.atom, ([], []))[1 if n.neg else 0].append(occ)
    for atom in sorted(groups):
        pos, neg = groups[atom]
        for p in pos:
            for q in neg:
                g = f
                for occ in (p, q):
                    lit = occ.node
                    g = hyper.replace_at(g, occ.path,
                                         Lit(fresh, lit.neg, lit.env))
                out.append(g)
    return out


def _match_modulo_fresh(prem: Formula, cand: Formula, conclusion: Formula) -> bool:
    # cand uses a placeholder witness; accept prem if it equals cand after
    # renaming one elementary atom absent from the conclusion
    prem_atoms = _collect_atoms(prem)
    concl_atoms = _collect_atoms(conclusion)
    new = prem_atoms - concl_atoms
    if len(new) != 1:
        return False
    witness = new.pop()
    if is_general(witness):
        return False

    def rn(n: Formula) -> Formula:
        if isinstance(n, Lit) and n.atom == witness:
            return Lit("q1", n.neg, n.env)
        kids = children(n)
        if kids:
            return hyper.with_kids(n, tuple(rn(k) for k in kids))
        return n

    return canon(rn(prem)) == canon(cand)


def verify_plain(lines) -> bool:
    """Check a plain derivation: a sequence of (formula, rule, premise line
    numbers), premise numbers 1-based and strictly earlier."""
    seq = list(lines)
    for idx, (f, rule, prems) in enumerate(seq, start=1):
        if not _plain_ok(f):
            return False
        if any(not 1 <= j < idx for j in prems):
            return False
        cited = [seq[j - 1][0] for j in prems]
        if rule == WAIT:
            if not is_stable(f):
                return False
            want = sorted(canon(p) for p in _plain_wait_premises(f))
            got = sorted(canon(p) for p in cited)
            if want != got:
                return False
        elif rule in (CHOOSE, SWITCH):
            if len(cited) != 1:
                return False
            cands = {canon(p) for p in _plain_machine_premises(f, rule)}
            if canon(cited[0]) not in cands:
                return False
        elif rule == MATCH:
            if len(cited) != 1:
                return False
            if not any(_match_modulo_fresh(cited[0], cand, f)
                       for cand in _plain_match_premises(f)):
                return False
        else:
            return False
    return True


# ---------------------------------------------------------------------------
# Serialization

def _fmt_path(p: Path | None) -> str:
    if not p:
        return "-"
    return ".".join(str(i) for i in p)


def proof_to_text(p: Proof) -> str:
    lines: list[str] = []

    def go(n: Proof, depth: int):
        pad = "  " * depth
        if n.rule == WAIT:
            lines.append(f"{pad}wait {show(n.conclusion)}")
        elif n.rule == CHOOSE:
            addr, i = n.action
            lines.append(f"{pad}choose @{_fmt_path(addr)} i={i} {show(n.conclusion)}")
        elif n.rule == SWITCH:
            (addr,) = n.action
            lines.append(f"{pad}switch @{_fmt_path(addr)} {show(n.conclusion)}")
        else:
            pos, neg, fresh = n.action
            lines.append(f"{pad}match @{_fmt_path(pos)}~@{_fmt_path(neg)} "
                         f"{fresh} {show(n.conclusion)}")
        for q in n.premises:
            go(q, depth + 1)

    go(p, 0)
    return "\n".join(lines) + "\n"
