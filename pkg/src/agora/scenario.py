"""Scenario loading and the deterministic round-robin runner.

A scenario directory holds one ``<name>.agent`` file per agent plus
``scenario.cfg``.  Config lines (``%`` comments allowed):

    ticks <n>
    seed <n>
    script <agent> <tick> query <to> <formula text>
    script <agent> <tick> switch <to>
    script <agent> <tick> choose <to> <i> [path]
    script <agent> <tick> atom <to> <text> [path]
    train <agent> <atom> true|false
    valuation <atom> true|false
    oracle <Atom> true|false

Agents take turns in file-name order; each turn drains the agent's mailbox
and then runs scheduler steps to quiescence.  Identical inputs and seed
give a byte-identical trace.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path as FsPath

from .agentd import (
    BaseAgent, Bus, EtaAgent, KBState, Message, RegularAgent, SuperAgent,
    encode_message, make_agent, super_script_step,
)
from .formula import AgentSpec, parse_agent_file
from .runtime import AtomMove, Choose, Interpretation, Switch, parse_path


@dataclass(frozen=True)
class TraceEvent:
    tick: int
    agent: str
    direction: str  # "in" | "out" | "internal"
    payload: str

    def line(self) -> str:
        return f"{self.tick} {self.agent} {self.direction} {self.payload}"


@dataclass
class ScriptAction:
    agent: str
    tick: int
    kind: str  # "query" | "switch" | "choose" | "atom"
    peer: str
    arg: str = ""
    path: tuple = ()


@dataclass
class ScenarioConfig:
    ticks: int = 10
    seed: int = 0
    scripts: list[ScriptAction] = field(default_factory=list)
    training: dict[str, list[tuple[str, bool]]] = field(default_factory=dict)
    valuation: dict[str, bool] = field(default_factory=dict)
    oracle: dict[str, bool] = field(default_factory=dict)


class ScenarioError(ValueError):
    pass


def _bool(tok: str, where: str) -> bool:
    if tok == "true":
        return True
    if tok == "false":
        return False
    raise ScenarioError(f"{where}: expected true|false, got {tok!r}")


def parse_config(text: str) -> ScenarioConfig:
    cfg = ScenarioConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("%", 1)[0].strip()
        if not line:
            continue
        where = f"scenario.cfg:{lineno}"
        words = line.split()
        key = words[0]
        try:
            if key == "ticks":
                cfg.ticks = int(words[1])
            elif key == "seed":
                cfg.seed = int(words[1])
            elif key == "valuation":
                cfg.valuation[words[1]] = _bool(words[2], where)
            elif key == "oracle":
                cfg.oracle[words[1]] = _bool(words[2], where)
            elif key == "train":
                cfg.training.setdefault(words[1], []).append(
                    (words[2], _bool(words[3], where)))
            elif key == "script":
                agent, tick, kind = words[1], int(words[2]), words[3]
                if kind == "query":
                    cfg.scripts.append(ScriptAction(
                        agent, tick, kind, words[4], " ".join(words[5:])))
                elif kind == "switch":
                    path = parse_path(words[5]) if len(words) > 5 else ()
                    cfg.scripts.append(ScriptAction(agent, tick, kind, words[4],
                                                    path=path))
                elif kind in ("choose", "atom"):
                    path = parse_path(words[6]) if len(words) > 6 else ()
                    cfg.scripts.append(ScriptAction(agent, tick, kind, words[4],
                                                    words[5], path))
                else:
                    raise ScenarioError(f"{where}: unknown script action {kind!r}")
            else:
                raise ScenarioError(f"{where}: unknown directive {key!r}")
        except (IndexError, ValueError) as e:
            if isinstance(e, ScenarioError):
                raise
            raise ScenarioError(f"{where}: malformed line") from None
    return cfg


@dataclass
class Scenario:
    specs: list[AgentSpec]
    config: ScenarioConfig

    def interpretation(self) -> Interpretation:
        oracles = {name: (lambda run, v=v: v)
                   for name, v in self.config.oracle.items()}
        return Interpretation(dict(self.config.valuation), oracles)


def load_scenario(path: str | FsPath) -> Scenario:
    d = FsPath(path)
    if not d.is_dir():
        raise ScenarioError(f"{d}: not a directory")
    specs = []
    names = set()
    for f in sorted(d.glob("*.agent")):
        spec = parse_agent_file(f.read_text(encoding="utf-8"))
        if spec.name in names:
            raise ScenarioError(f"{f.name}: duplicate agent {spec.name!r}")
        names.add(spec.name)
        specs.append(spec)
    if not specs:
        raise ScenarioError(f"{d}: no agent files")
    cfg_file = d / "scenario.cfg"
    cfg = parse_config(cfg_file.read_text(encoding="utf-8")) if cfg_file.exists() \
        else ScenarioConfig()
    for act in cfg.scripts:
        if act.agent not in names:
            raise ScenarioError(f"script references unknown agent {act.agent!r}")
    for name in cfg.training:
        if name not in names:
            raise ScenarioError(f"training references unknown agent {name!r}")
    for spec in specs:
        kb = KBState(spec.kb)
        for i in range(len(spec.kb)):
            provider = kb.provider_of(i)
            if provider is not None and provider not in names:
                raise ScenarioError(
                    f"{spec.name}: entry {i} names unknown agent {provider!r}")
    return Scenario(specs, cfg)


class Runner:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.cfg = scenario.config
        self.rng = random.Random(self.cfg.seed)
        self.trace: list[TraceEvent] = []
        self.bus = Bus()
        self.agents: dict[str, BaseAgent] = {}
        self.order: list[str] = []
        self.tick = 0
        for spec in scenario.specs:
            agent = make_agent(spec)
            self.agents[spec.name] = agent
            self.order.append(spec.name)
            self.bus.register(spec.name)
            agent.log = (lambda direction, payload, name=spec.name:
                         self._log(name, direction, payload))
        for name, samples in self.cfg.training.items():
            agent = self.agents[name]
            if isinstance(agent, EtaAgent):
                agent.train(samples)
                self._log(name, "internal", f"trained {len(samples)} samples")

    def _log(self, agent: str, direction: str, payload: str) -> None:
        self.trace.append(TraceEvent(self.tick, agent, direction, payload))

    def _post(self, sender: str, msgs: list[Message]) -> None:
        for m in msgs:
            self._log(sender, "out", encode_message(m))
            self.bus.post(sender, m)

    def _script_payload(self, act: ScriptAction):
        if act.kind == "switch":
            return Switch()
        if act.kind == "choose":
            return Choose(int(act.arg))
        return AtomMove(act.arg)

    def _run_scripts(self) -> None:
        for act in self.cfg.scripts:
            if act.tick != self.tick:
                continue
            agent = self.agents[act.agent]
            if not isinstance(agent, SuperAgent):
                raise ScenarioError(
                    f"script action for non-super agent {act.agent!r}")
            try:
                if act.kind == "query":
                    msg = agent.script_query(act.peer, act.arg)
                else:
                    msg = agent.script_move(act.peer, self._script_payload(act),
                                            act.path)
            except ValueError as e:
                self._log(act.agent, "internal", f"script-error {e}")
                continue
            self._post(act.agent, [msg])

    def _turn(self, name: str) -> None:
        agent = self.agents[name]
        for msg in self.bus.fetch(name):
            self._log(name, "in", encode_message(msg))
            self._post(name, agent.on_message(msg))
        if isinstance(agent, EtaAgent):
            agent.idle_tick()
        if isinstance(agent, RegularAgent):
            while True:
                status, msgs = agent.step()
                self._post(name, msgs)
                if status in ("case2-idle", "case3-idle"):
                    break

    def quiescent(self) -> bool:
        if any(self.bus.boxes[n] for n in self.order):
            return False
        if any(act.tick > self.tick for act in self.cfg.scripts):
            return False
        for agent in self.agents.values():
            if isinstance(agent, RegularAgent) and agent.qi:
                return False
        return True

    def run(self) -> list[TraceEvent]:
        for self.tick in range(self.cfg.ticks):
            self._run_scripts()
            for name in self.order:
                self._turn(name)
            if self.quiescent():
                self._log("runner", "internal", "quiescent")
                break
        return self.trace


def run_scenario(path: str | FsPath) -> list[TraceEvent]:
    return Runner(load_scenario(path)).run()


def trace_text(trace: list[TraceEvent]) -> str:
    return "\n".join(ev.line() for ev in trace) + "\n"


def check_assertions(trace: list[TraceEvent], patterns: list[str]) -> str | None:
    """Ordered substring patterns; returns the first unmatched pattern."""
    lines = [ev.line() for ev in trace]
    pos = 0
    for pat in patterns:
        pat = pat.strip()
        if not pat or pat.startswith("%"):
            continue
        while pos < len(lines) and pat not in lines[pos]:
            pos += 1
        if pos >= len(lines):
            return pat
        pos += 1
    return None
