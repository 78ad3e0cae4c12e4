"""Random, well-formed task specs for property tests and sweeps.

Every generated spec carries the full validity predicate (all parts present,
every resource capped, every handoff reference intact), so each structural
feature the classifier looks at is also something the engine can observe.
"""
from __future__ import annotations

import random
from fractions import Fraction

from calmtier.lattice import (
    CAUSAL_APPEND,
    EXCLUSIVE_ASSIGN,
    GROW_COUNTER,
    MAX_REGISTER,
    MIN_REGISTER,
    SET_UNION,
    JoinKind,
    Kind,
    map_of,
)
from calmtier.task import (
    AgentScript,
    Emission,
    FeedbackEdge,
    HandoffEdge,
    PredicateKind,
    ResourceConstraint,
    SubTask,
    TaskSpec,
    ValidityPredicate,
)

INFLATIONARY = (SET_UNION, MAX_REGISTER, MIN_REGISTER, GROW_COUNTER, map_of(SET_UNION))


def script_output(kind: JoinKind, sid: str, rng: random.Random):
    name = kind.name
    if name is Kind.SET_UNION or name is Kind.CAUSAL_APPEND:
        return [f"{sid}:item{i}" for i in range(rng.randint(1, 3))]
    if name in (Kind.MAX_REGISTER, Kind.MIN_REGISTER):
        return rng.randint(-20, 20)
    if name is Kind.GROW_COUNTER:
        return rng.randint(0, 9)
    if name is Kind.MAP_OF_JOINS:
        assert kind.inner is not None
        return {f"k{i}": script_output(kind.inner, sid, rng) for i in range(rng.randint(1, 2))}
    return f"{sid}:slot{rng.randint(0, 3)}"


def random_spec(rng: random.Random, max_subtasks: int = 4, *, p_edge: float = 0.4,
                p_retractive: float = 0.12, p_exclusive: float = 0.08,
                p_unknown: float = 0.03, p_feedback: float = 0.25,
                name: str | None = None) -> TaskSpec:
    n = rng.randint(1, max_subtasks)
    ids = [f"t{i}" for i in range(n)]
    handoffs = [HandoffEdge(a, b) for i, a in enumerate(ids) for b in ids[i + 1:]
                if rng.random() < p_edge]

    def reaches(src: str, dst: str) -> bool:
        frontier, seen = [src], set()
        while frontier:
            x = frontier.pop()
            for e in handoffs:
                if e.source == x and e.target not in seen:
                    seen.add(e.target)
                    frontier.append(e.target)
        return dst in seen

    feedbacks = []
    for up in ids:
        for down in ids:
            if reaches(up, down) and rng.random() < p_feedback:
                kind = Emission.RETRACTIVE if rng.random() < 0.4 else Emission.ADDITIVE
                feedbacks.append(FeedbackEdge(down, up, kind))

    resources = []
    for r in range(rng.choice((0, 0, 1, 2))):
        resources.append(ResourceConstraint(f"r{r}", Fraction(rng.randint(0, 30)),
                                            shared=rng.random() < 0.85))

    demands: dict[str, list] = {sid: [] for sid in ids}
    for res in resources:
        if res.shared:
            for sid in ids:
                if rng.random() < 0.6:
                    demands[sid].append((res.id, Fraction(rng.randint(0, 15))))
        else:
            owner = rng.choice(ids)
            amount = Fraction(rng.randint(0, int(res.capacity)))
            demands[owner].append((res.id, amount))

    subtasks = []
    for sid in ids:
        roll = rng.random()
        if roll < p_unknown:
            emission = None
        elif roll < p_unknown + p_retractive:
            emission = Emission.RETRACTIVE
        else:
            emission = Emission.ADDITIVE
        roll = rng.random()
        if roll < p_unknown:
            kind = None
        elif roll < p_unknown + p_exclusive:
            kind = EXCLUSIVE_ASSIGN
        elif roll < p_unknown + p_exclusive + 0.12:
            kind = CAUSAL_APPEND
        else:
            kind = rng.choice(INFLATIONARY)
        output = script_output(kind or EXCLUSIVE_ASSIGN, sid, rng)
        preds = tuple(sorted(e.source for e in handoffs if e.target == sid))
        subtasks.append(SubTask(sid, f"role-{sid}", emission, kind, preds,
                                tuple(demands[sid]), AgentScript(output)))

    terms = [ValidityPredicate(PredicateKind.ALL_PARTS_PRESENT, parts=tuple(ids))]
    terms += [ValidityPredicate(PredicateKind.RESOURCE_CAP_RESPECTED, resource=r.id)
              for r in resources]
    terms.append(ValidityPredicate(PredicateKind.CAUSAL_REFERENCE_INTACT))
    return TaskSpec(name or f"random-{rng.getrandbits(32):08x}", "random task",
                    tuple(subtasks), tuple(handoffs), tuple(feedbacks), tuple(resources),
                    ValidityPredicate.conjunction(*terms))


def random_specs(count: int, seed: int = 0, **kwargs) -> list[TaskSpec]:
    rng = random.Random(seed)
    return [random_spec(rng, name=f"random-{seed}-{i}", **kwargs) for i in range(count)]
