"""Coordination tiers for task specs.

A spec is tiered by a fixed decision procedure over its structure:

1. any retractive emission or exclusive-assign output  -> NM
2. any shared resource whose summed demands exceed its capacity -> NM
3. any retractive feedback edge -> NM
4. otherwise any handoff, additive feedback or causal-append output -> M-O
5. otherwise -> M

A subtask with no declared emission or output kind cannot be judged and is
treated as NM (``defaulted``), since a false monotone label is the costly
mistake.

The five named tests reported in the evidence trace are a reconstruction;
each one checks exactly one structural feature used by the procedure above.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

from calmtier.lattice import Kind
from calmtier.task import Emission, TaskSpec, Thompson, format_rational, validate_graph


class Tier(str, enum.Enum):
    M = "M"
    M_O = "M-O"
    NM = "NM"

    @property
    def rank(self) -> int:
        return ("M", "M-O", "NM").index(self.value)

    @classmethod
    def parse(cls, raw: str) -> Tier:
        raw = raw.strip().upper().replace("_", "-")
        return cls(raw)


class TestName(str, enum.Enum):
    RETRACTION = "Retraction"
    SHARED_RESOURCE_NEGATION = "SharedResourceNegation"
    ORDER_SENSITIVITY = "OrderSensitivity"
    FEEDBACK_KIND = "FeedbackKind"
    MERGE_CONFLICT = "MergeConflict"


NM_FORCING = (TestName.RETRACTION, TestName.SHARED_RESOURCE_NEGATION,
              TestName.FEEDBACK_KIND, TestName.MERGE_CONFLICT)


class ClassificationError(Exception):
    pass


class InvalidSpec(ClassificationError):
    pass


class AmbiguousLabel(ClassificationError):
    pass


@dataclass(frozen=True)
class TestResult:
    test: TestName
    fired: bool
    detail: str = ""

    def __post_init__(self) -> None:
        if self.fired and not self.detail:
            raise ValueError("a fired test must name the offending element")


@dataclass(frozen=True)
class Classification:
    tier: Tier
    inferred_thompson: Thompson
    evidence: tuple[TestResult, ...]
    defaulted: bool = False
    task_id: str = ""
    thompson_hint: Thompson | None = None

    def fired(self) -> list[TestResult]:
        return [t for t in self.evidence if t.fired]

    def to_json(self) -> dict:
        return {
            "task": self.task_id,
            "tier": self.tier.value,
            "inferred_thompson": self.inferred_thompson.value,
            "thompson_hint": None if self.thompson_hint is None else self.thompson_hint.value,
            "defaulted": self.defaulted,
            "evidence": [{"test": t.test.value, "fired": t.fired, "detail": t.detail}
                         for t in self.evidence],
        }


def worst_case_demand(spec: TaskSpec, resource_id: str) -> Fraction:
    return sum((a for s in spec.subtasks for rid, a in s.demands if rid == resource_id),
               Fraction(0))


def _join(details: list[str]) -> str:
    return "; ".join(details)


def classify(spec: TaskSpec) -> Classification:
    diagnostics = validate_graph(spec)
    if diagnostics:
        raise InvalidSpec("; ".join(d.message for d in diagnostics))

    retraction, merge_conflict, unknown = [], [], []
    order_sensitive = []
    for s in spec.subtasks:
        if s.emission is None:
            unknown.append(s.id)
            retraction.append(f"subtask '{s.id}' has no declared emission (assumed retractive)")
        elif s.emission is Emission.RETRACTIVE:
            retraction.append(f"subtask '{s.id}' emits retractively")
        if s.output_decl is None:
            unknown.append(s.id)
            merge_conflict.append(f"subtask '{s.id}' has no declared output kind "
                                  "(assumed unmergeable)")
        else:
            if s.output_decl.contains(Kind.EXCLUSIVE_ASSIGN):
                merge_conflict.append(f"subtask '{s.id}' output is {s.output_decl}")
            if s.output_decl.contains(Kind.CAUSAL_APPEND):
                order_sensitive.append(f"subtask '{s.id}' output is {s.output_decl}")

    negation = []
    for r in spec.resources:
        if not r.shared:
            continue
        demand = worst_case_demand(spec, r.id)
        if demand > r.capacity:
            negation.append(f"resource '{r.id}' capacity {format_rational(r.capacity)} "
                            f"< worst-case demand {format_rational(demand)}")

    retractive_fb = [f"retractive feedback {e.source}->{e.target}"
                     for e in spec.feedbacks if e.kind is Emission.RETRACTIVE]
    order_sensitive = [f"handoff {e.source}->{e.target}" for e in spec.handoffs] + \
        [f"additive feedback {e.source}->{e.target}"
         for e in spec.feedbacks if e.kind is Emission.ADDITIVE] + order_sensitive

    evidence = (
        TestResult(TestName.RETRACTION, bool(retraction), _join(retraction)),
        TestResult(TestName.SHARED_RESOURCE_NEGATION, bool(negation), _join(negation)),
        TestResult(TestName.ORDER_SENSITIVITY, bool(order_sensitive), _join(order_sensitive)),
        TestResult(TestName.FEEDBACK_KIND, bool(retractive_fb), _join(retractive_fb)),
        TestResult(TestName.MERGE_CONFLICT, bool(merge_conflict), _join(merge_conflict)),
    )
    defaulted = bool(unknown)
    if defaulted or any(t.fired for t in evidence if t.test in NM_FORCING):
        tier = Tier.NM
    elif order_sensitive:
        tier = Tier.M_O
    else:
        tier = Tier.M
    return Classification(tier, infer_thompson(spec, bool(negation)), evidence, defaulted,
                          spec.id, spec.thompson_hint)


def infer_thompson(spec: TaskSpec, contention: bool = False) -> Thompson:
    """Thompson category read off the graph shape.

    Resource contention counts as mutual adjustment: every claimant constrains
    every other, which is a cycle even when no edge is drawn.
    """
    if contention or any(e.kind is Emission.RETRACTIVE for e in spec.feedbacks):
        return Thompson.RECIPROCAL
    if spec.feedbacks:
        return Thompson.SEQUENTIAL_WITH_FEEDBACK
    if spec.handoffs:
        return Thompson.SEQUENTIAL
    return Thompson.POOLED


def bridge_map(thompson: Thompson, feedback: Emission | None = None) -> Tier:
    """Tier implied by an interdependence category alone.

    Sequential-with-feedback is undecided until the feedback kind is known.
    """
    if thompson is Thompson.POOLED:
        return Tier.M
    if thompson is Thompson.SEQUENTIAL:
        return Tier.M_O
    if thompson is Thompson.RECIPROCAL:
        return Tier.NM
    if feedback is None:
        raise AmbiguousLabel("sequential_with_feedback needs the feedback kind "
                             "(additive stays M-O, retractive is NM)")
    return Tier.M_O if feedback is Emission.ADDITIVE else Tier.NM


def explain(c: Classification) -> str:
    lines = []
    head = f"{c.task_id}: tier {c.tier.value}" if c.task_id else f"tier {c.tier.value}"
    lines.append(head)
    thompson = f"  thompson: {c.inferred_thompson.value}"
    if c.thompson_hint is not None:
        verdict = "agrees" if c.thompson_hint is c.inferred_thompson else "differs"
        thompson += f" (declared {c.thompson_hint.value}, {verdict})"
    lines.append(thompson)
    if c.defaulted:
        lines.append("  defaulted to NM: undeclared emission or output kind")
    fired = c.fired()
    if not fired:
        lines.append("  no tests fired")
    for t in fired:
        lines.append(f"  {t.test.value}: {t.detail}")
    return "\n".join(lines) + "\n"
