import random

import pytest

from agora.formula import negate, parse_formula
from agora.hyper import stamp, to_hyper
from agora.runtime import (
    AtomMove, Choose, GameState, IllegalMove, Interpretation, Move, Player,
    Switch, mirror_deficit, parse_move, render_move, winner,
)
from tests.conftest import gen_plain

P = parse_formula


def state_of(text):
    return GameState(stamp(to_hyper(P(text))))


def test_player_complement():
    assert Player.MACHINE.other is Player.ENV
    assert Player.ENV.other.other is Player.ENV


def test_move_rendering_round_trip():
    m = Move(Player.MACHINE, (1, 0, 2), Choose(1))
    assert render_move(m) == "⊤ 1.0.2 choose:1"
    assert parse_move(render_move(m)) == m
    m = Move(Player.ENV, (), Switch())
    assert render_move(m) == "⊥ - switch"
    assert parse_move(render_move(m)) == m
    m = Move(Player.ENV, (0,), AtomMove("x1"))
    assert parse_move(render_move(m)) == m
    with pytest.raises(ValueError):
        parse_move("⊤ 1 jump")


def test_legal_choice():
    st = state_of("(p & q) \\/ r")
    assert st.legal(Move(Player.ENV, (0,), Choose(0)))
    assert not st.legal(Move(Player.MACHINE, (0,), Choose(0)))
    st.apply(Move(Player.ENV, (0,), Choose(1)))
    assert not st.legal(Move(Player.ENV, (0,), Choose(0)))


def test_legal_switch_leaders():
    st = state_of("(b0 # b1 # b2) \\/ (~b0 @ ~b1)")
    assert st.legal(Move(Player.ENV, (0,), Switch()))
    assert not st.legal(Move(Player.MACHINE, (0,), Switch()))
    assert st.legal(Move(Player.MACHINE, (1,), Switch()))
    # catch-up only after the leader has led
    assert not st.legal(Move(Player.MACHINE, (0,), Switch()))
    st.apply(Move(Player.ENV, (0,), Switch()))
    assert st.legal(Move(Player.MACHINE, (0,), Switch()))


def test_apply_chain_exhaustion():
    st = state_of("b0 # b1 # b2")
    st.apply(Move(Player.ENV, (), Switch()))
    st.apply(Move(Player.ENV, (), Switch()))
    with pytest.raises(IllegalMove):
        st.apply(Move(Player.ENV, (), Switch()))


def test_address_stability():
    st = state_of("(p & q) \\/ (b0 # b1)")
    before = dict(st.index)
    st.apply(Move(Player.ENV, (0,), Choose(0)))
    st.apply(Move(Player.ENV, (1,), Switch()))
    assert st.index == before


def test_winner_elementary():
    st = state_of("p").close()
    assert winner(st, Interpretation({"p": True})) is Player.MACHINE
    assert winner(st, Interpretation({"p": False})) is Player.ENV


def test_winner_unresolved_choices():
    st = state_of("p + q").close()
    assert winner(st, Interpretation({"p": True, "q": True})) is Player.ENV
    st = state_of("p & q").close()
    assert winner(st, Interpretation({})) is Player.MACHINE


def test_winner_chain_uses_leader_count():
    st = state_of("b0 # b1")
    st.apply(Move(Player.ENV, (), Switch()))
    st.close()
    assert winner(st, Interpretation({"b1": True})) is Player.MACHINE
    assert winner(st, Interpretation({"b1": False})) is Player.ENV


def test_winner_catchup_ignored():
    st = state_of("~b0 @ ~b1")
    st.apply(Move(Player.MACHINE, (), Switch()))
    st.apply(Move(Player.ENV, (), Switch()))  # catch-up
    st.close()
    assert winner(st, Interpretation({"b1": False})) is Player.MACHINE


def test_winner_requires_termination():
    st = state_of("p")
    with pytest.raises(ValueError):
        winner(st, Interpretation({}))


def test_winner_general_atom_oracle():
    st = state_of("~P \\/ q")
    st.apply(Move(Player.ENV, (0,), AtomMove("a")))
    st.close()
    # oracle sees the negative occurrence in the atom's own frame
    seen = []

    def oracle(run):
        seen.append(run)
        return True

    res = winner(st, Interpretation({"q": False}, {"P": oracle}))
    assert res is Player.ENV  # ~P loses when P's machine wins
    assert seen[0] == ((Player.MACHINE, "a"),)


def test_winner_flips_under_negation():
    from agora.formula import Cho, Seq, Lit, is_general
    from agora.runtime import seq_leader
    rng = random.Random(17)
    for trial in range(200):
        f = gen_plain(rng, 3, allow_annot=False)
        st = GameState(stamp(to_hyper(f)))
        stn = GameState(stamp(to_hyper(negate(f))))
        moves = []
        for path, node in st.index.items():
            if isinstance(node, Cho):
                who = Player.ENV if node.who == "env" else Player.MACHINE
                i = rng.randrange(len(node.kids))
                moves.append((Move(who, path, Choose(i)),
                              Move(who.other, path, Choose(i))))
            elif isinstance(node, Seq):
                who = seq_leader(node)
                for _ in range(rng.randint(0, len(node.kids) - 1)):
                    moves.append((Move(who, path, Switch()),
                                  Move(who.other, path, Switch())))
            elif isinstance(node, Lit) and is_general(node.atom):
                who = rng.choice([Player.ENV, Player.MACHINE])
                moves.append((Move(who, path, AtomMove(f"a{len(moves)}")),
                              Move(who.other, path, AtomMove(f"a{len(moves)}"))))
        rng.shuffle(moves)
        for a, b in moves[: rng.randint(0, len(moves))]:
            if st.legal(a):
                st.apply(a)
                stn.apply(b)
        st.close()
        stn.close()
        val = {a: rng.random() < 0.5 for a in "pqrxy"}
        val.update({"b0": True, "b1": False, "d0": True})
        from tests.drivers import hash_oracle
        oracles = {g: hash_oracle(g, trial) for g in ("P", "Q", "R")}
        interp = Interpretation(val, oracles, default_verdict=rng.random() < 0.5)
        assert winner(stn, interp) is winner(st, interp).other


def test_copycat_lemma():
    """Mirror-image runs on a hybrid pair make the pair's disjunction
    machine-won under any shared oracle."""
    rng = random.Random(19)
    for trial in range(50):
        st = state_of("~P \\/ P")
        for k in range(rng.randint(0, 6)):
            if rng.random() < 0.5:
                st.apply(Move(Player.ENV, (0,), AtomMove(f"t{k}")))
                st.apply(Move(Player.MACHINE, (1,), AtomMove(f"t{k}")))
            else:
                st.apply(Move(Player.ENV, (1,), AtomMove(f"t{k}")))
                st.apply(Move(Player.MACHINE, (0,), AtomMove(f"t{k}")))
        assert mirror_deficit(st, (1,), (0,)) == 0
        st.close()
        from tests.drivers import hash_oracle
        interp = Interpretation({}, {"P": hash_oracle("P", trial)})
        assert winner(st, interp) is Player.MACHINE


def test_mirror_deficit():
    st = state_of("~P \\/ P")
    assert mirror_deficit(st, (1,), (0,)) == 0
    st.apply(Move(Player.ENV, (0,), AtomMove("x")))
    assert mirror_deficit(st, (1,), (0,)) == 1
    st.apply(Move(Player.MACHINE, (1,), AtomMove("x")))
    assert mirror_deficit(st, (1,), (0,)) == 0
    with pytest.raises(ValueError):
        mirror_deficit(st, (1,), (1,))
