import random

import pytest

from agora.formula import (
    Cho, ENV, Formula, Hyb, Lit, MACH, Par, Seq, annotate,
)

ELEMS = ["p", "q", "r", "b0", "b1", "d0", "x", "y"]
GENERALS = ["P", "Q", "R"]
AGENTS = ["u", "w", "db", "m"]


def gen_plain(rng: random.Random, depth: int, *, allow_annot=True,
              allow_general=True) -> Formula:
    """Random parser-shaped NNF formula: flattened chains, optional single
    annotation layer, no constants or hybrids."""
    if allow_annot and depth > 0 and rng.random() < 0.25:
        inner = gen_plain(rng, depth, allow_annot=False,
                          allow_general=allow_general)
        return annotate(inner, rng.choice(AGENTS))
    if depth == 0 or rng.random() < 0.3:
        pool = ELEMS + (GENERALS if allow_general else [])
        return Lit(rng.choice(pool), rng.random() < 0.4)
    kind = rng.choice(["par", "cho", "seq"])
    n = rng.randint(2, 3)
    kids = []
    if kind == "par":
        op = rng.choice(["and", "or"])
        for _ in range(n):
            k = gen_plain(rng, depth - 1, allow_annot=allow_annot,
                          allow_general=allow_general)
            if isinstance(k, Par) and k.op == op and k.env is None:
                kids.extend(k.kids)
            else:
                kids.append(k)
        return Par(op, tuple(kids))
    who = rng.choice([ENV, MACH])
    cls = Cho if kind == "cho" else Seq
    for _ in range(n):
        k = gen_plain(rng, depth - 1, allow_annot=allow_annot,
                      allow_general=allow_general)
        if isinstance(k, cls) and k.who == who and k.env is None:
            kids.extend(k.kids)
        else:
            kids.append(k)
    return cls(who, tuple(kids))


def gen_hyper(rng: random.Random, depth: int, max_atoms: int = 12) -> Formula:
    """Random hyperformula: random underlines, occasional hybrid literals."""

    def go(d: int) -> Formula:
        if d == 0 or rng.random() < 0.35:
            if rng.random() < 0.15:
                return Hyb(rng.choice(GENERALS),
                           "h" + str(rng.randint(0, 3)), rng.random() < 0.5)
            return Lit(rng.choice(ELEMS + GENERALS), rng.random() < 0.4)
        kind = rng.choice(["par", "cho", "seq"])
        n = rng.randint(2, 3)
        kids = tuple(go(d - 1) for _ in range(n))
        if kind == "par":
            return Par(rng.choice(["and", "or"]), kids)
        if kind == "cho":
            return Cho(rng.choice([ENV, MACH]), kids)
        return Seq(rng.choice([ENV, MACH]), kids, u=rng.randrange(n))

    return go(depth)


@pytest.fixture
def rng():
    return random.Random(20260810)
