"""Deterministic discrete-event execution of task specs.

Three scheduling regimes are simulated:

``uncoordinated``
    Every agent fires whenever the scheduler picks it, with whatever inputs
    have reached it so far (possibly none). Outputs go straight to a sink that
    merges them with ``join``.
``causal``
    Same fire-and-forget merge, but an agent's first output is held back until
    its vector clock covers the send stamp of every handoff predecessor.
``orchestrated``
    A central orchestrator serializes agents in a topological order, relays
    handoffs, grants resources first-fit, re-runs consumers after a retraction
    and commits only the final version of every output.

Time is a virtual tick counter and every random choice comes from a seeded
``random.Random``, so ``run(spec, mode, seed)`` is reproducible.

Cost model: one unit per message. Payload messages carry agent output or
feedback; coordination messages (plan, assignment, relay, review) exist only
under orchestration.
"""
from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterator, Mapping, Protocol, Sequence

from calmtier.lattice import (
    EXCLUSIVE_ASSIGN,
    Entry,
    Kind,
    LatticeError,
    LatticeValue,
    format_rational,
    grow,
    join,
    make_value,
)
from calmtier.task import (
    Emission,
    PredicateKind,
    SubTask,
    TaskSpec,
    ValidityPredicate,
)

EXHAUSTIVE_LIMIT = 6
SINK = "sink"
ORCHESTRATOR = "orchestrator"


class EngineError(Exception):
    pass


class ScriptMissing(EngineError):
    pass


class Mode(str, enum.Enum):
    UNCOORDINATED = "uncoordinated"
    CAUSAL = "causal"
    ORCHESTRATED = "orchestrated"


class Verdict(str, enum.Enum):
    VALID = "VALID"
    INVALID = "INVALID"


# --- agents ---------------------------------------------------------------


class Agent(Protocol):
    """Adapter for whatever produces a subtask's contribution.

    ``phase`` is one of ``"output"``, ``"draft"``, ``"revision"`` or
    ``"feedback"``; ``inputs`` maps producer ids to the values seen so far.
    Implementations must be deterministic in their arguments.
    """

    def act(self, subtask: SubTask, phase: str, inputs: Mapping[str, LatticeValue],
            seed: int) -> LatticeValue: ...


def effective_kind(subtask: SubTask):
    # an undeclared output kind is treated as opaque and unmergeable
    return subtask.output_decl or EXCLUSIVE_ASSIGN


class ScriptedAgent:
    """Realizes a subtask's :class:`AgentScript`; ignores the seed."""

    def act(self, subtask, phase, inputs, seed):
        script = subtask.script
        if script is None:
            raise ScriptMissing(f"subtask '{subtask.id}' has no script")
        kind = effective_kind(subtask)

        def build(raw):
            if kind.name is Kind.EXCLUSIVE_ASSIGN and not isinstance(raw, str):
                raw = json.dumps(raw, sort_keys=True)
            return make_value(kind, raw, subtask.id)

        output = build(script.output)
        if phase == "output":
            return output
        if phase == "draft":
            return build(script.draft) if script.draft is not None else grow(output, "provisional")
        if phase == "revision":
            return build(script.revision) if script.revision is not None else output
        if phase == "feedback":
            if script.feedback is not None:
                return build(script.feedback)
            source = ",".join(sorted(inputs))
            return grow(output, f"feedback:{source}")
        raise ValueError(f"unknown phase {phase!r}")


SCRIPTED = ScriptedAgent()


# --- schedules and faults -----------------------------------------------


@dataclass(frozen=True)
class Partition:
    """Agents in ``agents`` can neither send nor receive during [start, end)."""

    start: int
    end: int
    agents: frozenset[str]

    def __post_init__(self) -> None:
        if not (0 <= self.start <= self.end):
            raise ValueError("partition interval must satisfy 0 <= start <= end")

    def blocks(self, who: Sequence[str], tick: int) -> bool:
        return self.start <= tick < self.end and any(a in self.agents for a in who)


@dataclass(frozen=True)
class PartitionPlan:
    partitions: tuple[Partition, ...] = ()
    delays: tuple[tuple[str, int], ...] = ()  # (event label, earliest tick)

    @classmethod
    def from_json(cls, raw: Mapping[str, Any]) -> PartitionPlan:
        unknown = set(raw) - {"partitions", "delays"}
        if unknown:
            raise ValueError(f"unknown partition-plan key(s): {', '.join(sorted(unknown))}")
        parts = tuple(Partition(int(p["start"]), int(p["end"]), frozenset(p["agents"]))
                      for p in raw.get("partitions", []))
        delays = tuple(sorted((str(k), int(v)) for k, v in raw.get("delays", {}).items()))
        return cls(parts, delays)

    def to_json(self) -> dict:
        return {
            "partitions": [{"start": p.start, "end": p.end, "agents": sorted(p.agents)}
                           for p in self.partitions],
            "delays": dict(self.delays),
        }

    def blocked(self, who: Sequence[str], tick: int) -> bool:
        return any(p.blocks(who, tick) for p in self.partitions)

    def released(self, label: str, tick: int) -> bool:
        return tick >= dict(self.delays).get(label, 0)

    @property
    def horizon(self) -> int:
        ends = [p.end for p in self.partitions] + [d for _, d in self.delays]
        return max(ends, default=0)


NO_FAULTS = PartitionPlan()


@dataclass(frozen=True)
class Schedule:
    order: tuple[str, ...]
    plan: PartitionPlan = NO_FAULTS

    def to_json(self) -> dict:
        return {"order": list(self.order), **self.plan.to_json()}


@dataclass(frozen=True)
class Message:
    id: int
    tick: int
    label: str
    sender: str
    recipients: tuple[str, ...]
    coordination: bool = False
    stamp: tuple[tuple[str, int], ...] = ()

    def to_json(self) -> dict:
        return {"id": self.id, "tick": self.tick, "label": self.label, "sender": self.sender,
                "recipients": list(self.recipients),
                "class": "coordination" if self.coordination else "payload",
                "stamp": dict(self.stamp)}


# --- outputs ------------------------------------------------------------


@dataclass(frozen=True)
class Section:
    """The merged output of one subtask as seen by whoever assembled the result."""

    value: LatticeValue | None
    version: int
    unapplied_retractions: int = 0
    last_retraction: int | None = None
    refs: tuple[tuple[str, int | None], ...] = ()
    error: str | None = None

    def to_json(self) -> dict:
        out: dict[str, Any] = {"version": self.version}
        if self.error is not None:
            out["error"] = self.error
        else:
            out["value"] = self.value.to_json()
        out["unapplied_retractions"] = self.unapplied_retractions
        out["last_retraction"] = self.last_retraction
        out["refs"] = dict(self.refs)
        return out


@dataclass(frozen=True)
class FinalOutput:
    sections: tuple[tuple[str, Section], ...]
    allocations: tuple[tuple[str, tuple[tuple[str, Fraction], ...]], ...]

    def section(self, sid: str) -> Section | None:
        return dict(self.sections).get(sid)

    def allocated(self, rid: str) -> Fraction:
        return sum((a for _, a in dict(self.allocations).get(rid, ())), Fraction(0))

    def to_json(self) -> dict:
        return {
            "sections": {sid: sec.to_json() for sid, sec in self.sections},
            "allocations": {rid: {sid: format_rational(a) for sid, a in rows}
                            for rid, rows in self.allocations},
        }

    def canonical(self) -> bytes:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":")).encode()


@dataclass(frozen=True)
class RunResult:
    task_id: str
    mode: Mode
    seed: int | None
    schedule: Schedule
    final_output: FinalOutput
    verdict: Verdict
    verdict_reason: str
    messages_total: int
    messages_coordination: int
    cost_units: int
    trace: tuple[Message, ...]

    @property
    def valid(self) -> bool:
        return self.verdict is Verdict.VALID

    def to_json(self, with_trace: bool = True) -> dict:
        out = {
            "task": self.task_id,
            "mode": self.mode.value,
            "seed": self.seed,
            "schedule": self.schedule.to_json(),
            "verdict": self.verdict.value,
            "verdict_reason": self.verdict_reason,
            "messages_total": self.messages_total,
            "messages_coordination": self.messages_coordination,
            "cost_units": self.cost_units,
            "final_output": self.final_output.to_json(),
        }
        if with_trace:
            out["trace"] = [m.to_json() for m in self.trace]
        return out


# --- evaluation ---------------------------------------------------------


def evaluate(spec: TaskSpec, final_output: FinalOutput) -> tuple[Verdict, str]:
    """Binary verdict of the spec's validity predicate on a final output.

    A section whose merge failed means no output exists for it, so any merge
    error is INVALID whatever the predicate says.
    """
    failures = [f"section '{sid}': {sec.error}" for sid, sec in final_output.sections
                if sec.error is not None]
    failures += _check(spec, spec.validity, final_output)
    if failures:
        return Verdict.INVALID, "; ".join(dict.fromkeys(failures))
    return Verdict.VALID, ""


def _check(spec: TaskSpec, p: ValidityPredicate, out: FinalOutput) -> list[str]:
    if p.kind is PredicateKind.CONJUNCTION:
        return [f for t in p.terms for f in _check(spec, t, out)]
    if p.kind is PredicateKind.ALL_PARTS_PRESENT:
        failures = []
        for part in p.parts:
            sec = out.section(part)
            if sec is None:
                failures.append(f"part '{part}' missing")
            elif sec.unapplied_retractions:
                failures.append(f"part '{part}' retains {sec.unapplied_retractions} "
                                "retracted version(s) that join cannot remove")
        return failures
    if p.kind is PredicateKind.RESOURCE_CAP_RESPECTED:
        capacity = spec.resource(p.resource).capacity
        total = out.allocated(p.resource)
        if total > capacity:
            return [f"resource '{p.resource}': allocated {format_rational(total)} > "
                    f"capacity {format_rational(capacity)}"]
        return []
    edges = p.edges if p.edges is not None else [(e.source, e.target) for e in spec.handoffs]
    failures = []
    for producer, consumer in edges:
        sec = out.section(consumer)
        if sec is None or sec.error is not None:
            continue
        seen = dict(sec.refs).get(producer)
        if seen is None:
            failures.append(f"'{consumer}' output lacks '{producer}' reference")
            continue
        upstream = out.section(producer)
        if upstream is not None and upstream.last_retraction is not None \
                and seen < upstream.last_retraction:
            failures.append(f"'{consumer}' references retracted version {seen} of '{producer}'")
    return failures


# --- fire-and-forget execution -----------------------------------------


Event = tuple  # ("out", a) | ("rev", a) | ("fb", d, u) | ("upd", u, d)


def label(e: Event) -> str:
    if e[0] == "fb":
        return f"fb:{e[1]}>{e[2]}"
    if e[0] == "upd":
        return f"upd:{e[1]}<{e[2]}"
    return f"{e[0]}:{e[1]}"


def retracts(spec: TaskSpec, sid: str) -> bool:
    sub = spec.subtask(sid)
    return sub.emission is not Emission.ADDITIVE or any(
        f.target == sid and f.kind is Emission.RETRACTIVE for f in spec.feedbacks)


def _stamped(value: LatticeValue, author: str, stamp: tuple) -> LatticeValue:
    if value.kind.name is not Kind.CAUSAL_APPEND:
        return value
    entries = frozenset(Entry(e.author, e.item, stamp) if not e.stamp and e.author == author
                        else e for e in value.payload)
    return LatticeValue(value.kind, entries)


def _absorb(old: LatticeValue | None, new: LatticeValue) -> LatticeValue:
    if old is None or old.kind != new.kind or not new.kind.is_semilattice:
        return new
    return join(old, new)


@dataclass
class _SinkSection:
    value: LatticeValue | None = None
    version: int = -1
    unapplied: int = 0
    last_retraction: int | None = None
    refs: dict = field(default_factory=dict)
    refs_version: int = -1
    error: str | None = None

    def freeze(self) -> Section:
        return Section(self.value if self.error is None else None, self.version,
                       self.unapplied, self.last_retraction, tuple(sorted(self.refs.items())),
                       self.error)


class _Flow:
    """State of one fire-and-forget execution (uncoordinated or causal)."""

    def __init__(self, spec: TaskSpec, mode: Mode, agents: Mapping[str, Agent], seed: int):
        self.spec, self.mode, self.agents, self.seed = spec, mode, agents, seed
        ids = spec.ids
        self.pending: list[Event] = [("out", a) for a in ids]
        self.pending += [("rev", a) for a in ids if spec.subtask(a).emission is not Emission.ADDITIVE]
        self.pending += [("fb", f.source, f.target) for f in spec.feedbacks]
        self.pending += [("upd", f.target, f.source) for f in spec.feedbacks]
        self.pending.sort()
        self.fired: set[Event] = set()
        self.clock = {a: {} for a in ids}
        self.out_stamp: dict[str, dict] = {}
        self.seen: dict[str, dict[str, tuple[int, LatticeValue]]] = {a: {} for a in ids}
        self.feedback_in: dict[str, dict[str, LatticeValue]] = {a: {} for a in ids}
        self.current: dict[str, LatticeValue] = {}
        self.version = {a: -1 for a in ids}
        self.sink = {a: _SinkSection() for a in ids}
        self.allocations: dict[str, dict[str, Fraction]] = {}
        self.trace: list[Message] = []

    # scheduling -----------------------------------------------------
    def enabled(self) -> list[Event]:
        return [e for e in self.pending if e not in self.fired and self._ready(e)]

    def _ready(self, e: Event) -> bool:
        if e[0] == "out":
            if self.mode is not Mode.CAUSAL:
                return True
            me = self.clock[e[1]]
            for p in self.spec.predecessors(e[1]):
                stamp = self.out_stamp.get(p)
                if stamp is None or me.get(p, 0) < stamp[p]:
                    return False
            return True
        if e[0] in ("rev", "fb"):
            return ("out", e[1]) in self.fired
        return ("fb", e[2], e[1]) in self.fired and ("out", e[1]) in self.fired

    def participants(self, e: Event) -> tuple[str, ...]:
        if e[0] == "fb":
            return (e[1], e[2])
        return (e[1], SINK, *self.spec.successors(e[1]))

    # execution ------------------------------------------------------
    def _tick(self, who: str) -> tuple:
        clock = self.clock[who]
        clock[who] = clock.get(who, 0) + 1
        return tuple(sorted(clock.items()))

    def _act(self, sid: str, phase: str, inputs: Mapping[str, LatticeValue]) -> LatticeValue:
        sub = self.spec.subtask(sid)
        return self.agents[sid].act(sub, phase, inputs, self.seed)

    def _inputs(self, sid: str) -> dict[str, LatticeValue]:
        return {p: v for p, (_, v) in sorted(self.seen[sid].items())}

    def _refs(self, sid: str) -> dict[str, int | None]:
        seen = self.seen[sid]
        return {p: seen[p][0] if p in seen else None for p in self.spec.predecessors(sid)}

    def _chain(self, sid: str, value: LatticeValue) -> LatticeValue:
        # a causal log extends every log it has received
        if value.kind.name is Kind.CAUSAL_APPEND:
            for v in self._inputs(sid).values():
                if v.kind == value.kind:
                    value = join(value, v)
        return value

    def fire(self, e: Event, tick: int) -> None:
        self.fired.add(e)
        kind = e[0]
        if kind == "fb":
            source, target = e[1], e[2]
            stamp = self._tick(source)
            self.feedback_in[target][source] = self.current[source]
            self._merge_clock(target, stamp)
            self._log(tick, e, source, (target,), stamp)
            return
        sid = e[1]
        retract = False
        if kind == "out":
            phase = "draft" if retracts(self.spec, sid) else "output"
            value = self._chain(sid, self._act(sid, phase, self._inputs(sid)))
            for rid, amount in self.spec.subtask(sid).demands:
                self.allocations.setdefault(rid, {})[sid] = amount
        elif kind == "rev":
            value = self._chain(sid, self._act(sid, "revision", self._inputs(sid)))
            retract = True
        else:
            source = e[2]
            fb = next(f for f in self.spec.feedbacks if f.source == source and f.target == sid)
            if fb.kind is Emission.RETRACTIVE:
                value = self._chain(sid, self._act(sid, "revision", self._inputs(sid)))
                retract = True
            else:
                contribution = self._act(sid, "feedback", {source: self.feedback_in[sid][source]})
                value = _absorb(self.current[sid], self._chain(sid, contribution))
        stamp = self._tick(sid)
        value = _stamped(value, sid, stamp)
        if kind == "out":
            self.out_stamp[sid] = dict(stamp)
        self.version[sid] += 1
        self.current[sid] = value
        recipients = (SINK, *self.spec.successors(sid))
        self._deliver(sid, value, self.version[sid], retract, self._refs(sid))
        self._log(tick, e, sid, recipients, stamp)

    def _merge_clock(self, who: str, stamp: tuple) -> None:
        clock = self.clock[who]
        for k, v in stamp:
            clock[k] = max(clock.get(k, 0), v)

    def _deliver(self, sid, value, version, retract, refs) -> None:
        sec = self.sink[sid]
        if sec.error is None:
            try:
                if not value.kind.is_semilattice:
                    raise LatticeError(f"{value.kind} output has no join; "
                                       "fire-and-forget merge cannot combine it")
                sec.value = value if sec.value is None else join(sec.value, value)
            except LatticeError as exc:
                sec.error = str(exc)
        if retract:
            sec.unapplied += 1
            sec.last_retraction = max(version, sec.last_retraction or 0)
        sec.version = max(sec.version, version)
        if version >= sec.refs_version:
            sec.refs, sec.refs_version = refs, version
        for c in self.spec.successors(sid):
            prev = self.seen[c].get(sid)
            merged = _absorb(prev[1] if prev else None, value)
            self.seen[c][sid] = (max(version, prev[0] if prev else -1), merged)
            self._merge_clock(c, tuple(sorted(self.clock[sid].items())))

    def _log(self, tick, e, sender, recipients, stamp) -> None:
        self.trace.append(Message(len(self.trace), tick, label(e), sender, tuple(recipients),
                                  False, stamp))

    def final(self) -> FinalOutput:
        sections = tuple((a, self.sink[a].freeze()) for a in sorted(self.sink))
        allocations = tuple((r, tuple(sorted(rows.items())))
                            for r, rows in sorted(self.allocations.items()))
        return FinalOutput(sections, allocations)


def _drive(flow: _Flow, choose: Callable[[list[Event]], Event], plan: PartitionPlan) -> None:
    tick = 0
    while True:
        enabled = flow.enabled()
        if not enabled:
            return
        ready = [e for e in enabled
                 if plan.released(label(e), tick) and not plan.blocked(flow.participants(e), tick)]
        if not ready:
            if tick > plan.horizon:
                raise EngineError("scheduler stalled with no pending faults")
            tick += 1
            continue
        flow.fire(choose(ready), tick)
        tick += 1


# --- orchestrated execution --------------------------------------------


class _Orchestration:
    def __init__(self, spec: TaskSpec, agents: Mapping[str, Agent], seed: int,
                 plan: PartitionPlan):
        self.spec, self.agents, self.seed, self.plan = spec, agents, seed, plan
        self.trace: list[Message] = []
        self.tick = 0
        self.committed: dict[str, LatticeValue] = {}
        self.version = {a: -1 for a in spec.ids}
        self.last_retraction: dict[str, int] = {}
        self.refs: dict[str, dict] = {}
        self.granted: dict[str, dict[str, Fraction]] = {}

    def _send(self, lbl: str, sender: str, recipients: Sequence[str], coordination: bool) -> None:
        who = (sender, *recipients)
        while not self.plan.released(lbl, self.tick) or self.plan.blocked(who, self.tick):
            self.tick += 1
        self.trace.append(Message(len(self.trace), self.tick, lbl, sender, tuple(recipients),
                                  coordination))
        self.tick += 1

    def _commit(self, sid: str, value: LatticeValue, retraction: bool) -> None:
        self.version[sid] += 1
        self.committed[sid] = value
        if retraction:
            self.last_retraction[sid] = self.version[sid]

    def _act(self, sid, phase, inputs):
        return self.agents[sid].act(self.spec.subtask(sid), phase, inputs, self.seed)

    def _run_agent(self, sid: str, first: bool) -> None:
        spec = self.spec
        self._send(f"assign:{sid}", ORCHESTRATOR, (sid,), True)
        inputs = {}
        for p in spec.predecessors(sid):
            self._send(f"relay:{p}>{sid}", ORCHESTRATOR, (sid,), True)
            inputs[p] = self.committed[p]
        self.refs[sid] = {p: self.version[p] for p in spec.predecessors(sid)}
        stamp = ((ORCHESTRATOR, len(self.trace)),)
        phase = "draft" if first and retracts(spec, sid) else "output"
        value = self._chain(self._act(sid, phase, inputs), inputs)
        self._send(f"out:{sid}", sid, (ORCHESTRATOR,), False)
        self._commit(sid, _stamped(value, sid, stamp), False)
        if first:
            sub = spec.subtask(sid)
            for rid, amount in sub.demands:
                resource = spec.resource(rid)
                rows = self.granted.setdefault(rid, {})
                if resource.shared:
                    remaining = resource.capacity - sum(rows.values(), Fraction(0))
                    amount = max(Fraction(0), min(amount, remaining))
                rows[sid] = amount
            if sub.emission is not Emission.ADDITIVE:
                value = self._chain(self._act(sid, "revision", inputs), inputs)
                self._send(f"rev:{sid}", sid, (ORCHESTRATOR,), False)
                self._commit(sid, _stamped(value, sid, stamp), True)

    @staticmethod
    def _chain(value, inputs):
        if value.kind.name is Kind.CAUSAL_APPEND:
            for v in inputs.values():
                if v.kind == value.kind:
                    value = join(value, v)
        return value

    def execute(self, order: Sequence[str]) -> None:
        spec = self.spec
        self._send("plan", ORCHESTRATOR, tuple(order), True)
        for sid in order:
            self._run_agent(sid, first=True)
        position = {sid: i for i, sid in enumerate(order)}
        for fb in sorted(spec.feedbacks, key=lambda f: (position[f.source], f.target)):
            self._send(f"fb:{fb.source}>{fb.target}", fb.source, (ORCHESTRATOR,), False)
            self._send(f"relay:fb:{fb.source}>{fb.target}", ORCHESTRATOR, (fb.target,), True)
            u = fb.target
            if fb.kind is Emission.RETRACTIVE:
                inputs = {p: self.committed[p] for p in spec.predecessors(u)}
                value = self._chain(self._act(u, "revision", inputs), inputs)
                self._send(f"upd:{u}<{fb.source}", u, (ORCHESTRATOR,), False)
                self._commit(u, value, True)
                for d in [x for x in order if x in spec.descendants(u)]:
                    self._run_agent(d, first=False)
            else:
                contribution = self._act(u, "feedback", {fb.source: self.committed[fb.source]})
                self._send(f"upd:{u}<{fb.source}", u, (ORCHESTRATOR,), False)
                self._commit(u, _absorb(self.committed[u], contribution), False)
        self._send("review", ORCHESTRATOR, tuple(order), True)

    def final(self) -> FinalOutput:
        sections = tuple(
            (a, Section(self.committed[a], self.version[a], 0, self.last_retraction.get(a),
                        tuple(sorted(self.refs.get(a, {}).items()))))
            for a in sorted(self.committed))
        allocations = tuple((r, tuple(sorted(rows.items())))
                            for r, rows in sorted(self.granted.items()))
        return FinalOutput(sections, allocations)


# --- public operations --------------------------------------------------


def _agents_for(spec: TaskSpec, agents: Mapping[str, Agent] | None) -> dict[str, Agent]:
    out = {}
    for s in spec.subtasks:
        if agents is not None and s.id in agents:
            out[s.id] = agents[s.id]
        elif s.script is not None:
            out[s.id] = SCRIPTED
        else:
            raise ScriptMissing(f"subtask '{s.id}' has no script and no agent adapter")
    return out


def _result(spec, mode, seed, order, plan, final, trace) -> RunResult:
    verdict, reason = evaluate(spec, final)
    coordination = sum(1 for m in trace if m.coordination)
    return RunResult(spec.id, mode, seed, Schedule(tuple(order), plan), final, verdict, reason,
                     len(trace), coordination, len(trace), tuple(trace))


def _run_flow(spec, mode, agents, seed, choose, plan) -> RunResult:
    flow = _Flow(spec, mode, agents, seed if seed is not None else 0)
    _drive(flow, choose, plan)
    return _result(spec, mode, seed, [m.label for m in flow.trace], plan, flow.final(), flow.trace)


def _run_orchestrated(spec, agents, seed, order, plan) -> RunResult:
    orch = _Orchestration(spec, agents, seed if seed is not None else 0, plan)
    orch.execute(order)
    return _result(spec, Mode.ORCHESTRATED, seed, order, plan, orch.final(), orch.trace)


def random_topological_order(spec: TaskSpec, rng: random.Random) -> list[str]:
    remaining = set(spec.ids)
    order: list[str] = []
    while remaining:
        ready = sorted(a for a in remaining
                       if all(p in order for p in spec.predecessors(a)))
        pick = rng.choice(ready)
        order.append(pick)
        remaining.remove(pick)
    return order


def run(spec: TaskSpec, mode: Mode | str, seed: int = 0, *,
        agents: Mapping[str, Agent] | None = None,
        plan: PartitionPlan = NO_FAULTS) -> RunResult:
    """Execute ``spec`` once under ``mode``; the seed picks the interleaving."""
    mode = Mode(mode)
    resolved = _agents_for(spec, agents)
    rng = random.Random(seed)
    if mode is Mode.ORCHESTRATED:
        return _run_orchestrated(spec, resolved, seed, random_topological_order(spec, rng), plan)
    return _run_flow(spec, mode, resolved, seed, lambda ready: rng.choice(ready), plan)


def inject_partition(spec: TaskSpec, mode: Mode | str, plan: PartitionPlan, seed: int = 0,
                     *, agents: Mapping[str, Agent] | None = None) -> RunResult:
    """Like :func:`run`, with traffic to and from partitioned agents deferred."""
    return run(spec, mode, seed, agents=agents, plan=plan)


def message_events(spec: TaskSpec) -> int:
    """Number of payload messages in one fire-and-forget execution."""
    retractive = sum(1 for s in spec.subtasks if s.emission is not Emission.ADDITIVE)
    return len(spec.subtasks) + retractive + 2 * len(spec.feedbacks)


def interleavings(spec: TaskSpec, mode: Mode | str) -> Iterator[list[str]]:
    """Every admissible message order under ``mode`` (depth-first, sorted)."""
    mode = Mode(mode)
    if mode is Mode.ORCHESTRATED:
        yield from _linear_extensions(spec, [], set(spec.ids))
        return
    agents = _agents_for(spec, None)

    def rec(prefix: list[Event]) -> Iterator[list[Event]]:
        flow = _Flow(spec, mode, agents, 0)
        for i, e in enumerate(prefix):
            flow.fire(e, i)
        enabled = flow.enabled()
        if not enabled:
            yield prefix
            return
        for e in enabled:
            yield from rec(prefix + [e])

    for events in rec([]):
        yield [label(e) for e in events]


def _linear_extensions(spec, prefix, remaining) -> Iterator[list[str]]:
    if not remaining:
        yield list(prefix)
        return
    for a in sorted(remaining):
        if all(p in prefix for p in spec.predecessors(a)):
            yield from _linear_extensions(spec, prefix + [a], remaining - {a})


def replay(spec: TaskSpec, mode: Mode | str, order: Sequence[str], *,
           agents: Mapping[str, Agent] | None = None) -> RunResult:
    """Execute a specific interleaving (as produced by :func:`interleavings`)."""
    mode = Mode(mode)
    resolved = _agents_for(spec, agents)
    if mode is Mode.ORCHESTRATED:
        return _run_orchestrated(spec, resolved, None, list(order), NO_FAULTS)
    queue = list(order)

    def choose(ready: list[Event]) -> Event:
        want = queue.pop(0)
        for e in ready:
            if label(e) == want:
                return e
        raise EngineError(f"event {want} is not enabled at this point")

    return _run_flow(spec, mode, resolved, None, choose, NO_FAULTS)


def is_exhaustive(spec: TaskSpec) -> bool:
    return message_events(spec) <= EXHAUSTIVE_LIMIT


def enumerate_runs(spec: TaskSpec, mode: Mode | str, limit: int = 100, *, seed: int = 0,
                   exhaustive: bool | None = None,
                   agents: Mapping[str, Agent] | None = None) -> list[RunResult]:
    """All interleavings for small specs, otherwise ``limit`` seeded samples.

    Sampled runs use seeds ``seed, seed + 1, ...`` so they can be replayed.
    """
    if limit < 1:
        raise ValueError("limit must be at least 1")
    mode = Mode(mode)
    if exhaustive is None:
        exhaustive = is_exhaustive(spec)
    if exhaustive:
        return [replay(spec, mode, order, agents=agents) for order in interleavings(spec, mode)]
    return [run(spec, mode, seed + i, agents=agents) for i in range(limit)]


def measure_c(spec: TaskSpec, repetitions: int = 10, *, seed: int = 0) -> Fraction:
    """Mean orchestrated cost over mean uncoordinated cost (message-count proxy)."""
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    if not spec.subtasks:
        raise ValueError("a task without subtasks sends no messages")
    seeds = range(seed, seed + repetitions)
    orchestrated = sum(run(spec, Mode.ORCHESTRATED, s).cost_units for s in seeds)
    uncoordinated = sum(run(spec, Mode.UNCOORDINATED, s).cost_units for s in seeds)
    return Fraction(orchestrated, uncoordinated)


def validity_rate(runs: Sequence[RunResult]) -> Fraction:
    return Fraction(sum(r.valid for r in runs), len(runs))


def interleaving_count(spec: TaskSpec, mode: Mode | str) -> int:
    return sum(1 for _ in interleavings(spec, mode))


__all__ = [
    "Agent", "EngineError", "FinalOutput", "Message", "Mode", "Partition", "PartitionPlan",
    "RunResult", "Schedule", "ScriptMissing", "ScriptedAgent", "Section", "Verdict",
    "enumerate_runs", "evaluate", "inject_partition", "interleavings", "measure_c",
    "message_events", "replay", "run", "validity_rate",
]
