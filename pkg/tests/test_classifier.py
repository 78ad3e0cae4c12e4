import dataclasses

import pytest
from hypothesis import given
from hypothesis import strategies as st

from calmtier.bundle import bundled_task, bundled_tasks
from calmtier.classifier import (
    AmbiguousLabel,
    InvalidSpec,
    TestName as Check,
    Tier,
    bridge_map,
    classify,
    explain,
    infer_thompson,
)
from calmtier.lattice import EXCLUSIVE_ASSIGN
from calmtier.task import Emission, FeedbackEdge, HandoffEdge, Thompson, load_task
from strategies import task_specs

EXPECTED = {
    "strategy_pillars": Tier.M, "feature_specs": Tier.M, "marketing_content": Tier.M,
    "security_audit": Tier.M, "stage_gate": Tier.M_O, "ticket_escalation": Tier.M_O,
    "budget_allocation": Tier.NM, "backlog_sprint": Tier.NM,
    "production_schedule": Tier.NM, "headcount_allocation": Tier.NM,
}


def fired(c):
    return {t.test for t in c.fired()}


def chain(feedback=None):
    doc = {"id": "chain",
           "subtasks": [{"id": s, "role": s, "emission": "additive", "output_decl": "set_union",
                         "script": {"output": [s]}} for s in "ABC"],
           "handoffs": [{"from": "A", "to": "B"}, {"from": "B", "to": "C"}]}
    if feedback:
        doc["feedbacks"] = [{"from": "C", "to": "A", "kind": feedback}]
    return load_task(doc)


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_bundled_tiers(name):
    assert classify(bundled_task(name)).tier is EXPECTED[name]


def test_budget_fires_negation():
    c = classify(bundled_task("budget_allocation"))
    assert Check.SHARED_RESOURCE_NEGATION in fired(c)
    assert ("SharedResourceNegation: resource 'budget' capacity 100 < worst-case demand 150"
            in explain(c))


def test_pillars_fire_nothing():
    c = classify(bundled_task("strategy_pillars"))
    assert c.fired() == [] and "no tests fired" in explain(c)
    assert c.inferred_thompson is Thompson.POOLED


def test_feedback_kind_decides():
    c = classify(chain("retractive"))
    assert c.tier is Tier.NM and Check.FEEDBACK_KIND in fired(c)
    assert classify(chain("additive")).tier is Tier.M_O
    assert classify(chain()).tier is Tier.M_O


def test_undeclared_fields_default_to_nm():
    spec = chain()
    a = dataclasses.replace(spec.subtasks[0], emission=None)
    c = classify(dataclasses.replace(spec, subtasks=(a,) + spec.subtasks[1:]))
    assert c.tier is Tier.NM and c.defaulted
    assert "defaulted to NM" in explain(c)
    assert Check.RETRACTION in fired(c)

    b = dataclasses.replace(spec.subtasks[1], output_decl=None)
    c = classify(dataclasses.replace(spec, subtasks=(spec.subtasks[0], b, spec.subtasks[2])))
    assert c.defaulted and Check.MERGE_CONFLICT in fired(c)


def test_invalid_spec_rejected():
    spec = chain()
    bad = dataclasses.replace(spec, handoffs=spec.handoffs + (HandoffEdge("C", "A"),))
    with pytest.raises(InvalidSpec):
        classify(bad)


def test_bridge_map():
    assert bridge_map(Thompson.POOLED) is Tier.M
    assert bridge_map(Thompson.SEQUENTIAL) is Tier.M_O
    assert bridge_map(Thompson.RECIPROCAL) is Tier.NM
    with pytest.raises(AmbiguousLabel):
        bridge_map(Thompson.SEQUENTIAL_WITH_FEEDBACK)
    assert bridge_map(Thompson.SEQUENTIAL_WITH_FEEDBACK, Emission.ADDITIVE) is Tier.M_O
    assert bridge_map(Thompson.SEQUENTIAL_WITH_FEEDBACK, Emission.RETRACTIVE) is Tier.NM


def test_thompson_inference():
    assert infer_thompson(chain()) is Thompson.SEQUENTIAL
    assert infer_thompson(chain("additive")) is Thompson.SEQUENTIAL_WITH_FEEDBACK
    assert infer_thompson(chain("retractive")) is Thompson.RECIPROCAL


def test_tier_parsing():
    assert Tier.parse("M_O") is Tier.M_O and Tier.parse("M-O") is Tier.M_O
    assert Tier.M.rank < Tier.M_O.rank < Tier.NM.rank


@given(task_specs())
def test_classify_is_pure(spec):
    assert classify(spec) == classify(spec)


@given(task_specs(), st.data())
def test_adding_non_monotone_structure_never_lowers_tier(spec, data):
    before = classify(spec).tier
    if not spec.subtasks:
        return
    i = data.draw(st.integers(0, len(spec.subtasks) - 1))
    how = data.draw(st.sampled_from(["retract", "exclusive", "feedback"]))
    subs = list(spec.subtasks)
    if how == "retract":
        subs[i] = dataclasses.replace(subs[i], emission=Emission.RETRACTIVE)
        stronger = dataclasses.replace(spec, subtasks=tuple(subs))
    elif how == "exclusive":
        subs[i] = dataclasses.replace(subs[i], output_decl=EXCLUSIVE_ASSIGN)
        stronger = dataclasses.replace(spec, subtasks=tuple(subs))
    else:
        if not spec.handoffs:
            return
        e = data.draw(st.sampled_from(spec.handoffs))
        fb = FeedbackEdge(e.target, e.source, Emission.RETRACTIVE)
        stronger = dataclasses.replace(spec, feedbacks=spec.feedbacks + (fb,))
    after = classify(stronger)
    assert after.tier is Tier.NM and after.tier.rank >= before.rank


def test_every_bundled_evidence_names_its_element():
    for spec in bundled_tasks():
        for t in classify(spec).fired():
            assert t.detail
