"""Declarative multi-agent task specifications and their JSON loader."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from fractions import Fraction
from graphlib import CycleError, TopologicalSorter
from typing import Any, Mapping

from calmtier.lattice import JoinKind, format_rational, to_rational


class TaskError(Exception):
    pass


class SchemaError(TaskError):
    """The document does not have the shape of a task spec."""


class IntegrityError(TaskError):
    """The document parses but violates a graph or reference invariant."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(d.message for d in diagnostics))


class Emission(str, enum.Enum):
    ADDITIVE = "additive"
    RETRACTIVE = "retractive"


class Thompson(str, enum.Enum):
    POOLED = "pooled"
    SEQUENTIAL = "sequential"
    SEQUENTIAL_WITH_FEEDBACK = "sequential_with_feedback"
    RECIPROCAL = "reciprocal"


class PredicateKind(str, enum.Enum):
    ALL_PARTS_PRESENT = "all_parts_present"
    RESOURCE_CAP_RESPECTED = "resource_cap_respected"
    CAUSAL_REFERENCE_INTACT = "causal_reference_intact"
    CONJUNCTION = "conjunction"


@dataclass(frozen=True)
class AgentScript:
    """What a scripted agent contributes.

    ``output`` is the committed contribution. ``draft`` is what a retracting
    agent publishes first (defaults to a value strictly above ``output``),
    ``revision`` what it replaces it with (defaults to ``output``), and
    ``feedback`` what it adds when incorporating additive feedback.
    """

    output: Any
    draft: Any = None
    revision: Any = None
    feedback: Any = None


@dataclass(frozen=True)
class SubTask:
    id: str
    role: str = ""
    emission: Emission | None = Emission.ADDITIVE
    output_decl: JoinKind | None = None
    consumes: tuple[str, ...] = ()
    demands: tuple[tuple[str, Fraction], ...] = ()
    script: AgentScript | None = None


@dataclass(frozen=True)
class HandoffEdge:
    source: str
    target: str


@dataclass(frozen=True)
class FeedbackEdge:
    source: str  # downstream agent
    target: str  # upstream agent
    kind: Emission = Emission.ADDITIVE


@dataclass(frozen=True)
class ResourceConstraint:
    id: str
    capacity: Fraction
    shared: bool = True


@dataclass(frozen=True)
class ValidityPredicate:
    kind: PredicateKind
    parts: tuple[str, ...] = ()
    resource: str | None = None
    edges: tuple[tuple[str, str], ...] | None = None
    terms: tuple[ValidityPredicate, ...] = ()

    @classmethod
    def conjunction(cls, *terms: ValidityPredicate) -> ValidityPredicate:
        return cls(PredicateKind.CONJUNCTION, terms=tuple(terms))

    def walk(self):
        yield self
        for t in self.terms:
            yield from t.walk()


TRUE = ValidityPredicate(PredicateKind.CONJUNCTION)


@dataclass(frozen=True)
class TaskSpec:
    id: str
    name: str = ""
    subtasks: tuple[SubTask, ...] = ()
    handoffs: tuple[HandoffEdge, ...] = ()
    feedbacks: tuple[FeedbackEdge, ...] = ()
    resources: tuple[ResourceConstraint, ...] = ()
    validity: ValidityPredicate = TRUE
    thompson_hint: Thompson | None = None
    _index: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def subtask(self, sid: str) -> SubTask:
        if self._index is None:
            object.__setattr__(self, "_index", {s.id: s for s in self.subtasks})
        return self._index[sid]

    def resource(self, rid: str) -> ResourceConstraint:
        return next(r for r in self.resources if r.id == rid)

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.subtasks]

    def predecessors(self, sid: str) -> list[str]:
        return sorted({e.source for e in self.handoffs if e.target == sid})

    def successors(self, sid: str) -> list[str]:
        return sorted({e.target for e in self.handoffs if e.source == sid})

    def descendants(self, sid: str) -> set[str]:
        seen: set[str] = set()
        stack = [sid]
        while stack:
            for nxt in self.successors(stack.pop()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen

    def topological_order(self) -> list[str]:
        """Deterministic topological order of the handoff DAG (ties by id)."""
        ts = TopologicalSorter({s: self.predecessors(s) for s in sorted(self.ids)})
        ts.prepare()
        order: list[str] = []
        while ts.is_active():
            ready = sorted(ts.get_ready())
            order.extend(ready)
            ts.done(*ready)
        return order


# --- validation -----------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    code: str
    element: str
    message: str

    def __str__(self) -> str:
        return self.message


def validate_graph(spec: TaskSpec) -> list[Diagnostic]:
    """Return one diagnostic per violated invariant; empty means well formed."""
    out: list[Diagnostic] = []

    def add(code: str, element: str, message: str) -> None:
        out.append(Diagnostic(code, element, message))

    ids: set[str] = set()
    for s in spec.subtasks:
        if s.id in ids:
            add("duplicate-id", s.id, f"duplicate id '{s.id}'")
        ids.add(s.id)
    rids: set[str] = set()
    for r in spec.resources:
        if r.id in rids:
            add("duplicate-id", r.id, f"duplicate resource id '{r.id}'")
        rids.add(r.id)
        if r.capacity < 0:
            add("negative", r.id, f"resource '{r.id}' has negative capacity {r.capacity}")

    handoff_pairs = set()
    for e in spec.handoffs:
        label = f"{e.source}->{e.target}"
        for end in (e.source, e.target):
            if end not in ids:
                add("dangling", label, f"handoff {label} references unknown subtask '{end}'")
        if e.source == e.target:
            add("self-loop", label, f"handoff {label} is a self-loop")
        handoff_pairs.add((e.source, e.target))

    graph = {sid: set() for sid in ids}
    for a, b in handoff_pairs:
        if a in ids and b in ids and a != b:
            graph[b].add(a)
    try:
        tuple(TopologicalSorter(graph).static_order())
        acyclic = True
    except CycleError as exc:
        acyclic = False
        cycle = exc.args[1]
        add("cycle", "->".join(cycle), "handoff cycle through " + " -> ".join(cycle))

    for e in spec.feedbacks:
        label = f"{e.source}->{e.target}"
        missing = [end for end in (e.source, e.target) if end not in ids]
        for end in missing:
            add("dangling", label, f"feedback {label} references unknown subtask '{end}'")
        if missing or not acyclic:
            continue
        if e.source == e.target or e.source not in _reachable(graph, e.target):
            add("open-feedback", label, f"feedback without upstream path: {label}")

    demanders: dict[str, list[str]] = {}
    for s in spec.subtasks:
        for c in s.consumes:
            if (c, s.id) not in handoff_pairs:
                add("consumes", s.id, f"subtask '{s.id}' consumes '{c}' without a handoff edge")
        for rid, amount in s.demands:
            if rid not in rids:
                add("dangling", s.id, f"subtask '{s.id}' demands unknown resource '{rid}'")
            if amount < 0:
                add("negative", s.id, f"subtask '{s.id}' has negative demand {amount} on '{rid}'")
            demanders.setdefault(rid, []).append(s.id)
    for r in spec.resources:
        if r.shared:
            continue
        users = demanders.get(r.id, [])
        if len(users) > 1:
            add("unshared", r.id, f"unshared resource '{r.id}' demanded by {', '.join(users)}")
        total = sum((a for s in spec.subtasks for rid, a in s.demands if rid == r.id), Fraction(0))
        if total > r.capacity:
            add("unshared", r.id,
                f"unshared resource '{r.id}' demand {format_rational(total)} exceeds capacity")

    for p in spec.validity.walk():
        for part in p.parts:
            if part not in ids:
                add("dangling", "validity", f"validity references unknown subtask '{part}'")
        if p.resource is not None and p.resource not in rids:
            add("dangling", "validity", f"validity references unknown resource '{p.resource}'")
        for a, b in p.edges or ():
            if (a, b) not in handoff_pairs:
                add("dangling", "validity", f"validity references unknown handoff {a}->{b}")
    return out


def _reachable(graph_preds: Mapping[str, set[str]], start: str) -> set[str]:
    succs: dict[str, set[str]] = {k: set() for k in graph_preds}
    for node, preds in graph_preds.items():
        for p in preds:
            succs[p].add(node)
    seen, stack = set(), [start]
    while stack:
        for nxt in succs[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


# --- JSON (de)serialization ---------------------------------------------


_TOP_KEYS = {"id", "name", "subtasks", "handoffs", "feedbacks", "resources", "validity",
             "thompson_hint"}
_SUB_KEYS = {"id", "role", "emission", "output_decl", "consumes", "demands", "script"}
_SCRIPT_KEYS = {"output", "draft", "revision", "feedback"}


def _obj(raw: Any, where: str, allowed: set[str], required: set[str] = frozenset()) -> dict:
    if not isinstance(raw, Mapping):
        raise SchemaError(f"{where}: expected an object")
    unknown = set(raw) - allowed
    if unknown:
        raise SchemaError(f"{where}: unknown key(s) {', '.join(sorted(unknown))}")
    missing = required - set(raw)
    if missing:
        raise SchemaError(f"{where}: missing key(s) {', '.join(sorted(missing))}")
    return dict(raw)


def _list(raw: Any, where: str) -> list:
    if not isinstance(raw, list):
        raise SchemaError(f"{where}: expected a list")
    return raw


def _str(raw: Any, where: str) -> str:
    if not isinstance(raw, str):
        raise SchemaError(f"{where}: expected a string")
    return raw


def _enum(cls, raw: Any, where: str):
    try:
        return cls(raw)
    except ValueError:
        raise SchemaError(f"{where}: {raw!r} is not one of "
                          f"{', '.join(m.value for m in cls)}") from None


def _rational(raw: Any, where: str) -> Fraction:
    try:
        return to_rational(raw)
    except (ValueError, ZeroDivisionError) as exc:
        raise SchemaError(f"{where}: {exc}") from None


def _predicate(raw: Any, where: str) -> ValidityPredicate:
    body = _obj(raw, where, {"kind", "parts", "resource", "edges", "terms"}, {"kind"})
    kind = _enum(PredicateKind, body["kind"], f"{where}.kind")
    allowed = {
        PredicateKind.ALL_PARTS_PRESENT: {"kind", "parts"},
        PredicateKind.RESOURCE_CAP_RESPECTED: {"kind", "resource"},
        PredicateKind.CAUSAL_REFERENCE_INTACT: {"kind", "edges"},
        PredicateKind.CONJUNCTION: {"kind", "terms"},
    }[kind]
    _obj(body, where, allowed)
    if kind is PredicateKind.ALL_PARTS_PRESENT:
        parts = tuple(_str(p, f"{where}.parts") for p in _list(body.get("parts", []), where))
        return ValidityPredicate(kind, parts=parts)
    if kind is PredicateKind.RESOURCE_CAP_RESPECTED:
        if "resource" not in body:
            raise SchemaError(f"{where}: missing key(s) resource")
        return ValidityPredicate(kind, resource=_str(body["resource"], f"{where}.resource"))
    if kind is PredicateKind.CAUSAL_REFERENCE_INTACT:
        if "edges" not in body:
            return ValidityPredicate(kind)
        edges = []
        for e in _list(body["edges"], f"{where}.edges"):
            if not (isinstance(e, list) and len(e) == 2):
                raise SchemaError(f"{where}.edges: each edge is a [from, to] pair")
            edges.append((_str(e[0], where), _str(e[1], where)))
        return ValidityPredicate(kind, edges=tuple(edges))
    terms = tuple(_predicate(t, f"{where}.terms[{i}]")
                  for i, t in enumerate(_list(body.get("terms", []), where)))
    return ValidityPredicate(kind, terms=terms)


def _subtask(raw: Any, where: str) -> SubTask:
    body = _obj(raw, where, _SUB_KEYS, {"id"})
    emission = body.get("emission")
    output_decl = body.get("output_decl")
    if output_decl is not None:
        try:
            output_decl = JoinKind.from_json(output_decl)
        except ValueError as exc:
            raise SchemaError(f"{where}.output_decl: {exc}") from None
    demands = []
    for i, d in enumerate(_list(body.get("demands", []), f"{where}.demands")):
        d = _obj(d, f"{where}.demands[{i}]", {"resource", "amount"}, {"resource", "amount"})
        demands.append((_str(d["resource"], where), _rational(d["amount"], where)))
    script = body.get("script")
    if script is not None:
        script = AgentScript(**_obj(script, f"{where}.script", _SCRIPT_KEYS, {"output"}))
    return SubTask(
        id=_str(body["id"], f"{where}.id"),
        role=_str(body.get("role", ""), f"{where}.role"),
        emission=None if emission is None else _enum(Emission, emission, f"{where}.emission"),
        output_decl=output_decl,
        consumes=tuple(_str(c, f"{where}.consumes") for c in _list(body.get("consumes", []), where)),
        demands=tuple(demands),
        script=script,
    )


def task_from_dict(raw: Any) -> TaskSpec:
    """Parse without checking graph invariants (see :func:`load_task`)."""
    body = _obj(raw, "task", _TOP_KEYS, {"id"})
    handoffs, feedbacks, resources = [], [], []
    for i, e in enumerate(_list(body.get("handoffs", []), "handoffs")):
        e = _obj(e, f"handoffs[{i}]", {"from", "to"}, {"from", "to"})
        handoffs.append(HandoffEdge(_str(e["from"], "from"), _str(e["to"], "to")))
    for i, e in enumerate(_list(body.get("feedbacks", []), "feedbacks")):
        e = _obj(e, f"feedbacks[{i}]", {"from", "to", "kind"}, {"from", "to", "kind"})
        feedbacks.append(FeedbackEdge(_str(e["from"], "from"), _str(e["to"], "to"),
                                      _enum(Emission, e["kind"], f"feedbacks[{i}].kind")))
    for i, r in enumerate(_list(body.get("resources", []), "resources")):
        r = _obj(r, f"resources[{i}]", {"id", "capacity", "shared"}, {"id", "capacity"})
        shared = r.get("shared", True)
        if not isinstance(shared, bool):
            raise SchemaError(f"resources[{i}].shared: expected a boolean")
        resources.append(ResourceConstraint(_str(r["id"], "id"),
                                            _rational(r["capacity"], "capacity"), shared))
    hint = body.get("thompson_hint")
    return TaskSpec(
        id=_str(body["id"], "id"),
        name=_str(body.get("name", ""), "name"),
        subtasks=tuple(_subtask(s, f"subtasks[{i}]")
                       for i, s in enumerate(_list(body.get("subtasks", []), "subtasks"))),
        handoffs=tuple(handoffs),
        feedbacks=tuple(feedbacks),
        resources=tuple(resources),
        validity=_predicate(body["validity"], "validity") if "validity" in body else TRUE,
        thompson_hint=None if hint is None else _enum(Thompson, hint, "thompson_hint"),
    )


def load_task(document: str | bytes | Mapping) -> TaskSpec:
    """Parse and validate a task document (JSON text or an already-decoded dict).

    Raises :class:`SchemaError` for malformed fields, :class:`ValueError` for
    negative capacities or demands and :class:`IntegrityError` for dangling
    references, handoff cycles and other graph violations.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"not valid JSON: {exc}") from None
    spec = task_from_dict(document)
    diagnostics = validate_graph(spec)
    negative = [d for d in diagnostics if d.code == "negative"]
    if negative:
        raise ValueError("; ".join(d.message for d in negative))
    if diagnostics:
        raise IntegrityError(diagnostics)
    return spec


def _predicate_to_dict(p: ValidityPredicate) -> dict:
    out: dict[str, Any] = {"kind": p.kind.value}
    if p.kind is PredicateKind.ALL_PARTS_PRESENT:
        out["parts"] = list(p.parts)
    elif p.kind is PredicateKind.RESOURCE_CAP_RESPECTED:
        out["resource"] = p.resource
    elif p.kind is PredicateKind.CAUSAL_REFERENCE_INTACT:
        if p.edges is not None:
            out["edges"] = [list(e) for e in p.edges]
    else:
        out["terms"] = [_predicate_to_dict(t) for t in p.terms]
    return out


def _script_to_dict(s: AgentScript) -> dict:
    out = {"output": s.output}
    for key in ("draft", "revision", "feedback"):
        if getattr(s, key) is not None:
            out[key] = getattr(s, key)
    return out


def task_to_dict(spec: TaskSpec) -> dict:
    subtasks = []
    for s in spec.subtasks:
        body: dict[str, Any] = {"id": s.id, "role": s.role}
        if s.emission is not None:
            body["emission"] = s.emission.value
        if s.output_decl is not None:
            body["output_decl"] = s.output_decl.to_json()
        body["consumes"] = list(s.consumes)
        body["demands"] = [{"resource": r, "amount": format_rational(a)} for r, a in s.demands]
        if s.script is not None:
            body["script"] = _script_to_dict(s.script)
        subtasks.append(body)
    out = {
        "id": spec.id,
        "name": spec.name,
        "subtasks": subtasks,
        "handoffs": [{"from": e.source, "to": e.target} for e in spec.handoffs],
        "feedbacks": [{"from": e.source, "to": e.target, "kind": e.kind.value}
                      for e in spec.feedbacks],
        "resources": [{"id": r.id, "capacity": format_rational(r.capacity), "shared": r.shared}
                      for r in spec.resources],
        "validity": _predicate_to_dict(spec.validity),
    }
    if spec.thompson_hint is not None:
        out["thompson_hint"] = spec.thompson_hint.value
    return out


def dump_task(spec: TaskSpec) -> str:
    return json.dumps(task_to_dict(spec), indent=2, ensure_ascii=False) + "\n"


def load_task_file(path) -> TaskSpec:
    with open(path, encoding="utf-8") as fh:
        return load_task(fh.read())
