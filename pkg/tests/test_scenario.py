from pathlib import Path

import pytest

from agora.agentd import Message, super_script_step
from agora.scenario import (
    ScenarioError, check_assertions, load_scenario, parse_config,
    run_scenario, trace_text,
)

ROOT = Path(__file__).resolve().parent.parent
ATM = ROOT / "scenarios" / "atm"
HABITAT = ROOT / "scenarios" / "habitat"
SCHEDULER = ROOT / "scenarios" / "scheduler"


def lines_of(trace):
    return [ev.line() for ev in trace]


def test_parse_config():
    cfg = parse_config("""
% comment
ticks 12
seed 9
script kim 3 switch m
script user 0 query credit (b0 # b1)
valuation b1 true
""")
    assert cfg.ticks == 12 and cfg.seed == 9
    assert len(cfg.scripts) == 2
    assert cfg.valuation == {"b1": True}
    with pytest.raises(ScenarioError):
        parse_config("script kim 3 fly m")
    with pytest.raises(ScenarioError):
        parse_config("gravity 10")


def test_super_script_step():
    mk = lambda i: Message("OK", f"s:{i}")
    script = [(3, mk(0)), (2, mk(1)), (3, mk(2))]
    assert super_script_step(script, 3) == [mk(0), mk(2)]
    assert super_script_step(script, 1) == []
    assert super_script_step([], 5) == []


def test_atm_propagation():
    trace = lines_of(run_scenario(ATM))
    text = "\n".join(trace)

    # credit sees the initial answer head before the deposit tick
    i_obs = next(i for i, l in enumerate(trace)
                 if "credit internal observes db head=b0" in l)
    assert int(trace[i_obs].split()[0]) < 3

    # kim deposits exactly once, at tick 3
    deposits = [l for l in trace if "kim out MOVE" in l]
    assert len(deposits) == 1 and deposits[0].startswith("3 ")

    # each agent's entry advances at most once: one propagated switch per hop
    advances = [l for l in trace if "kb entry" in l and "advance" in l]
    assert [" ".join((l.split()[1], l.split()[5])) for l in advances] == [
        "m 0", "db 0", "m 1", "credit 0"]

    # credit observes the single switch to b1 after the deposit
    i_switch = next(i for i, l in enumerate(trace)
                    if "credit internal kb entry 0 advance rev=1 head=b1" in l)
    assert int(trace[i_switch].split()[0]) > 3
    assert text.count("credit internal kb entry 0 advance") == 1

    # the user observes exactly one pushed switch from credit
    pushes = [l for l in trace if "credit out MOVE user:0" in l]
    assert len(pushes) == 1 and "⊤ - switch" in pushes[0]

    # no failures anywhere
    assert "FAIL" not in text


def test_atm_deterministic():
    a = trace_text(run_scenario(ATM))
    b = trace_text(run_scenario(ATM))
    assert a == b


def test_habitat_answer():
    trace = lines_of(run_scenario(HABITAT))
    text = "\n".join(trace)
    assert "a internal answer user:0 habitat_i3_senegal" in text
    assert "d internal answer a:0 animal_i3_lion" in text
    # the user receives the machine's senegal choice
    assert any("user in MOVE user:0 a user ⊤ - choose:1" in l for l in trace)
    assert "FAIL" not in text


def test_scheduler_discipline():
    trace = lines_of(run_scenario(SCHEDULER))
    assertions = [
        "srv internal case1 pop c1:0",
        "srv internal solved c1:0 temporarily",
        "srv internal case1 pop c2:0",
        "srv internal solved c2:0 temporarily",
        "srv internal case2-idle",
        "flat internal case1 pop c1:1",
        "flat internal solved c1:1 completely",
        "flat internal case3-idle",
        "srv internal kb entry 0 advance rev=1",
        "srv internal case2-requeue c1:0",
        "srv internal case1 pop c1:0",
        "srv out MOVE c1:0 srv c1 ⊤ - switch",
        "srv internal case2-requeue c2:0",
        "srv internal case1 pop c2:0",
        "srv out MOVE c2:0 srv c2 ⊤ - switch",
        "srv internal case3-idle",
    ]
    from agora.scenario import check_assertions as chk
    failed = chk(run_scenario(SCHEDULER), assertions)
    assert failed is None, failed


def test_check_assertions_reports_first_miss():
    trace = run_scenario(SCHEDULER)
    failed = check_assertions(trace, ["srv internal case1 pop c1:0",
                                      "never appears"])
    assert failed == "never appears"


def test_demand_cascade(tmp_path):
    """A consumer's leading switch travels the whole provider chain: each
    agent echoes a catch-up and demands the next value from its provider."""
    (tmp_path / "credit.agent").write_text("agent credit. (b0 # b1 # b2)^db.\n")
    (tmp_path / "db.agent").write_text(
        "agent db. (d0 # d1 # d2)^m. d0 -> b0. d1 -> b1. d2 -> b2.\n")
    (tmp_path / "m.agent").write_text(
        "agent m. (d0 # d1 # d2)^kim. (b0 # b1 # b2)^db.\n")
    (tmp_path / "kim.agent").write_text("agent super kim.\n")
    (tmp_path / "user.agent").write_text("agent super user.\n")
    (tmp_path / "scenario.cfg").write_text(
        "ticks 8\nseed 1\n"
        "script user 0 query credit (b0 # b1 # b2)\n"
        "script user 2 switch credit\n")
    trace = run_scenario(tmp_path)
    failed = check_assertions(trace, [
        "user out MOVE user:0 user credit ⊥ - switch",   # the demand
        "credit out MOVE user:0 credit user ⊤ - switch",  # catch-up echo
        "credit out MOVE credit:0 credit db ⊥ - switch",  # demand downstream
        "db out MOVE credit:0 db credit ⊤ - switch",
        "db out MOVE db:0 db m ⊥ - switch",
        "m out MOVE db:0 m db ⊤ - switch",
        "m out MOVE m:0 m kim ⊥ - switch",               # reaches the super agent
    ])
    assert failed is None, failed
    lines = [ev.line() for ev in trace]
    text = "\n".join(lines)
    assert "FAIL" not in text
    # a re-solve must not repeat switches the old session already led
    assert len([l for l in lines if "m out MOVE m:0" in l]) == 1


def test_demand_then_deposits(tmp_path):
    """A demand that outran the provider composes with later deposits: the
    first deposit only confirms the demanded position, the second one
    propagates as a fresh answer push."""
    (tmp_path / "credit.agent").write_text("agent credit. (b0 # b1 # b2)^db.\n")
    (tmp_path / "db.agent").write_text(
        "agent db. (d0 # d1 # d2)^m. d0 -> b0. d1 -> b1. d2 -> b2.\n")
    (tmp_path / "m.agent").write_text(
        "agent m. (d0 # d1 # d2)^kim. (b0 # b1 # b2)^db.\n")
    (tmp_path / "kim.agent").write_text("agent super kim.\n")
    (tmp_path / "user.agent").write_text("agent super user.\n")
    (tmp_path / "scenario.cfg").write_text(
        "ticks 12\nseed 1\n"
        "script user 0 query credit (b0 # b1 # b2)\n"
        "script user 2 switch credit\n"
        "script kim 5 switch m\n"
        "script kim 6 switch m\n")
    trace = run_scenario(tmp_path)
    lines = [ev.line() for ev in trace]
    text = "\n".join(lines)
    assert "FAIL" not in text
    credit_updates = [l for l in lines if "credit internal kb entry 0 advance" in l]
    assert [l.split("head=")[1] for l in credit_updates] == ["b1", "b2"]
    # the first deposit confirms the demanded position: no push for it,
    # only the second one reaches credit (the tick 2 cascade echo aside)
    pushes = [l for l in lines
              if "db out MOVE credit:0 db credit ⊤ - switch" in l
              and int(l.split()[0]) >= 5]
    assert len(pushes) == 1
    assert trace[-1].payload == "quiescent"


def test_load_scenario_errors(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path)  # no agent files
    (tmp_path / "a.agent").write_text("agent a. p.")
    (tmp_path / "scenario.cfg").write_text("script ghost 0 switch a\n")
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path)


def test_load_scenario_rejects_unknown_provider(tmp_path):
    (tmp_path / "a.agent").write_text("agent a. (x0 # x1)^ghost.")
    (tmp_path / "scenario.cfg").write_text("ticks 2\n")
    with pytest.raises(ScenarioError, match="unknown agent"):
        load_scenario(tmp_path)


def test_quiescent_scenario_stops_early(tmp_path):
    (tmp_path / "a.agent").write_text("agent a. y.\n")
    (tmp_path / "u.agent").write_text("agent super u.\n")
    (tmp_path / "scenario.cfg").write_text(
        "ticks 50\nseed 1\nscript u 0 query a y\n")
    trace = run_scenario(tmp_path)
    assert trace[-1].payload == "quiescent"
    assert trace[-1].tick < 5
