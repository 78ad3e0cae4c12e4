import random
from fractions import Fraction

import pytest
from hypothesis import given, settings

from calmtier.bundle import bundled_task
from calmtier.engine import (
    NO_FAULTS,
    EngineError,
    FinalOutput,
    Mode,
    Partition,
    PartitionPlan,
    ScriptedAgent,
    Verdict,
    enumerate_runs,
    evaluate,
    inject_partition,
    interleaving_count,
    interleavings,
    measure_c,
    replay,
    run,
    validity_rate,
)
from calmtier.lattice import make_value
from calmtier.task import PredicateKind, TaskSpec, ValidityPredicate, load_task
from strategies import random_plan, task_specs

PILLARS = bundled_task("strategy_pillars")
BUDGET = bundled_task("budget_allocation")
STAGES = bundled_task("stage_gate")


@pytest.mark.parametrize("seed", range(5))
def test_budget_uncoordinated_always_overspends(seed):
    r = run(BUDGET, Mode.UNCOORDINATED, seed)
    assert r.verdict is Verdict.INVALID
    assert r.verdict_reason == "resource 'budget': allocated 150 > capacity 100"


@pytest.mark.parametrize("seed", range(5))
def test_budget_orchestrated_is_valid(seed):
    r = run(BUDGET, Mode.ORCHESTRATED, seed)
    assert r.valid and r.final_output.allocated("budget") <= 100


def test_pillars_union():
    r = run(PILLARS, Mode.UNCOORDINATED, 3)
    assert r.valid
    assert {s for s, _ in r.final_output.sections} == {"p1", "p2", "p3", "p4"}


def test_stage_gate_order_matters():
    assert run(STAGES, Mode.CAUSAL, 0).valid
    order = sorted(interleavings(STAGES, Mode.UNCOORDINATED), key=lambda o: o[::-1])
    backwards = [o for o in order if o.index("out:launch") < o.index("out:business_case")]
    r = replay(STAGES, Mode.UNCOORDINATED, backwards[0])
    assert r.verdict is Verdict.INVALID and "lacks" in r.verdict_reason


def test_interleaving_counts():
    assert interleaving_count(BUDGET, Mode.UNCOORDINATED) == 6
    assert interleaving_count(PILLARS, Mode.UNCOORDINATED) == 24
    assert validity_rate(enumerate_runs(BUDGET, Mode.UNCOORDINATED)) == 0
    assert validity_rate(enumerate_runs(PILLARS, Mode.UNCOORDINATED)) == 1


def test_empty_task_single_vacuous_run():
    empty = load_task({"id": "empty"})
    runs = enumerate_runs(empty, Mode.UNCOORDINATED)
    assert len(runs) == 1 and runs[0].valid


def test_evaluate_predicates():
    parts = ValidityPredicate(PredicateKind.ALL_PARTS_PRESENT, parts=("p1", "p2", "p3", "p4"))
    out = run(PILLARS, Mode.UNCOORDINATED).final_output
    assert evaluate(PILLARS, out)[0] is Verdict.VALID
    spec = TaskSpec("x", "", PILLARS.subtasks, validity=parts)
    assert evaluate(spec, FinalOutput((), ()))[0] is Verdict.INVALID
    assert evaluate(TaskSpec("t", ""), FinalOutput((), ()))[0] is Verdict.VALID


def test_over_cap_is_invalid():
    out = run(BUDGET, Mode.UNCOORDINATED).final_output
    assert out.allocated("budget") == Fraction(150)
    assert evaluate(BUDGET, out) == (Verdict.INVALID,
                                     "resource 'budget': allocated 150 > capacity 100")


def test_message_costs():
    assert run(PILLARS, Mode.UNCOORDINATED).cost_units == 4
    assert run(PILLARS, Mode.ORCHESTRATED).cost_units == 10
    assert measure_c(PILLARS) == Fraction(5, 2)
    single = load_task({"id": "one", "subtasks": [
        {"id": "a", "role": "a", "emission": "additive", "output_decl": "set_union",
         "script": {"output": ["x"]}}]})
    assert measure_c(single) == 4


def test_partition_keeps_confluent_output():
    plan = PartitionPlan((Partition(0, 5, frozenset({"p3"})),))
    base = run(PILLARS, Mode.UNCOORDINATED, 0)
    cut = inject_partition(PILLARS, Mode.UNCOORDINATED, plan, 0)
    assert cut.valid and cut.final_output.canonical() == base.final_output.canonical()
    assert inject_partition(PILLARS, Mode.UNCOORDINATED, NO_FAULTS, 0) == base


def test_budget_causal_partition_still_fails():
    plan = PartitionPlan((Partition(0, 3, frozenset({"capex"})),), (("out:marketing", 2),))
    runs = [inject_partition(BUDGET, Mode.CAUSAL, plan, s) for s in range(5)]
    assert not all(r.valid for r in runs)


def test_plan_json_round_trip():
    plan = PartitionPlan((Partition(1, 4, frozenset({"a", "b"})),), (("out:a", 3),))
    assert PartitionPlan.from_json(plan.to_json()) == plan
    with pytest.raises(ValueError):
        PartitionPlan.from_json({"partitions": [], "jitter": 1})
    with pytest.raises(ValueError):
        Partition(3, 1, frozenset())


def test_replay_rejects_disabled_event():
    with pytest.raises(EngineError):
        replay(STAGES, Mode.CAUSAL, ["out:launch"])


def test_custom_agent_is_used():
    class Loud(ScriptedAgent):
        def act(self, subtask, phase, inputs, seed):
            return make_value(subtask.output_decl, [f"{subtask.id}!"])

    r = run(PILLARS, Mode.UNCOORDINATED, agents={"p1": Loud()})
    assert r.final_output.section("p1").value.payload == {"p1!"}


@settings(max_examples=40, deadline=None)
@given(task_specs())
def test_runs_are_reproducible(spec):
    for mode in Mode:
        assert run(spec, mode, 7) == run(spec, mode, 7)


@settings(max_examples=40, deadline=None)
@given(task_specs())
def test_orchestration_is_always_valid(spec):
    assert all(run(spec, Mode.ORCHESTRATED, s).valid for s in range(3))


def test_random_partition_plans_are_replayable():
    rng = random.Random(5)
    labels = ["out:p1", "out:p2", "out:p3", "out:p4"]
    for _ in range(10):
        plan = random_plan(rng, PILLARS.ids, labels)
        assert inject_partition(PILLARS, Mode.CAUSAL, plan, 1) == \
            inject_partition(PILLARS, Mode.CAUSAL, plan, 1)
