import json

import pytest
from hypothesis import given

from calmtier.bundle import bundled_task, bundled_tasks
from calmtier.task import (
    Emission,
    IntegrityError,
    SchemaError,
    dump_task,
    load_task,
    task_to_dict,
    validate_graph,
)
from strategies import task_specs

BUDGET = {
    "id": "budget",
    "subtasks": [
        {"id": sid, "role": "unit", "emission": "additive", "output_decl": "set_union",
         "demands": [{"resource": "budget", "amount": amount}],
         "script": {"output": [sid]}}
        for sid, amount in (("a", 50), ("b", 60), ("c", 40))
    ],
    "resources": [{"id": "budget", "capacity": 100, "shared": True}],
    "validity": {"kind": "resource_cap_respected", "resource": "budget"},
}


def _chain(*ids, **extra):
    doc = {"id": "chain",
           "subtasks": [{"id": s, "role": s, "emission": "additive",
                         "output_decl": "set_union", "script": {"output": [s]}} for s in ids],
           "handoffs": [{"from": a, "to": b} for a, b in zip(ids, ids[1:])]}
    doc.update(extra)
    return doc


def test_budget_document():
    spec = load_task(json.dumps(BUDGET))
    assert len(spec.subtasks) == 3
    assert len(spec.resources) == 1 and spec.resources[0].shared
    assert [a for s in spec.subtasks for _, a in s.demands] == [50, 60, 40]


def test_empty_document_is_valid():
    spec = load_task({"id": "empty"})
    assert spec.subtasks == () and validate_graph(spec) == []


def test_handoff_cycle_rejected():
    doc = _chain("A", "B")
    doc["handoffs"].append({"from": "B", "to": "A"})
    with pytest.raises(IntegrityError) as exc:
        load_task(doc)
    assert any(d.code == "cycle" for d in exc.value.diagnostics)


def test_stage_gate_has_no_diagnostics():
    assert validate_graph(bundled_task("stage_gate")) == []


def test_open_feedback_loop():
    doc = _chain("A", "B", feedbacks=[{"from": "A", "to": "B", "kind": "additive"}])
    with pytest.raises(IntegrityError) as exc:
        load_task(doc)
    assert "feedback without upstream path" in str(exc.value)


def test_duplicate_id():
    doc = _chain("A", "B")
    doc["subtasks"].append(dict(doc["subtasks"][0]))
    with pytest.raises(IntegrityError, match="duplicate id"):
        load_task(doc)


@pytest.mark.parametrize("mutate, error", [
    (lambda d: d.update(extra=1), SchemaError),
    (lambda d: d["subtasks"][0].update(colour="red"), SchemaError),
    (lambda d: d["subtasks"][0].update(emission="sideways"), SchemaError),
    (lambda d: d["resources"][0].update(capacity=-1), ValueError),
    (lambda d: d["subtasks"][0]["demands"][0].update(amount=-5), ValueError),
    (lambda d: d["subtasks"][0]["demands"][0].update(resource="nope"), IntegrityError),
])
def test_malformed_documents(mutate, error):
    doc = json.loads(json.dumps(BUDGET))
    mutate(doc)
    with pytest.raises(error):
        load_task(doc)


def test_invalid_json_text():
    with pytest.raises(SchemaError):
        load_task("{not json")


def test_consumes_requires_handoff():
    doc = _chain("A", "B")
    doc["subtasks"][0]["consumes"] = ["B"]
    with pytest.raises(IntegrityError, match="without a handoff"):
        load_task(doc)


def test_graph_queries():
    spec = bundled_task("backlog_sprint")
    assert spec.topological_order()[0] == "product_owner"
    assert spec.descendants("product_owner") == {"team_web", "team_api"}
    assert spec.feedbacks[0].kind is Emission.RETRACTIVE


def test_bundled_tasks_round_trip():
    for spec in bundled_tasks():
        assert load_task(dump_task(spec)) == spec


@given(task_specs())
def test_generated_specs_round_trip(spec):
    assert validate_graph(spec) == []
    assert load_task(json.loads(json.dumps(task_to_dict(spec)))) == spec
