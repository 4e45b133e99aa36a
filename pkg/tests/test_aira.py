import time

import pytest

from protoflow import cnt, records, workflow

GOAL = (
    "Tune the dispersion until the average carbon nanotube diameter "
    "falls within 10-30 nm."
)


@pytest.fixture()
def wf(cnt_workflow_yaml):
    return workflow.parse_workflow(cnt_workflow_yaml)


@pytest.fixture()
def recorder(tmp_path):
    return workflow.RunRecorder(records.RecordStore(tmp_path / "data"))


def run_scripted(wf, recorder, goal=GOAL, max_steps=64):
    return workflow.run_aira(
        wf, goal, cnt.scripted_cnt_policy(), cnt.cnt_simulator(), recorder, max_steps=max_steps
    )


def test_cnt_replay(wf, recorder):
    started = time.perf_counter()
    run = run_scripted(wf, recorder)
    elapsed = time.perf_counter() - started

    assert elapsed < 1.0
    assert run.status == workflow.ENDED
    assert run.path == [1, 2, 4, 2, 4, 2, 4, 3, 2, 4, 2, 4]
    assert len(run.records) == len(run.path)
    assert len(run.phased) == len(run.path)

    diameters = [
        r.data.var["average_diameter_nm"] for r in run.record_bodies if "average_diameter_nm" in r.data.var
    ]
    assert diameters == [150.0, 80.0, 80.0, 40.0, 25.0]
    assert diameters[-1] == 25.0 and 10.0 <= diameters[-1] <= 30.0
    assert run.path.count(3) == 1  # exactly one dilution
    assert "25" in run.conclusion and "Goal reached" in run.conclusion

    # every record landed in the store, one per step, each edge-valid in order
    assert workflow.validate_path(wf, run.path).valid
    stored = recorder.store.list_records()
    assert sorted(r.airalogy_record_id for r in stored) == sorted(run.records)
    # sonication bookkeeping: the simulator accumulates on-time across passes
    totals = [
        r.data.var["total_on_time_min"] for r in run.record_bodies if "total_on_time_min" in r.data.var
    ]
    assert totals == [30.0, 60.0, 90.0, 120.0, 150.0]


def test_records_carry_parameters_and_feedback(wf, recorder):
    run = run_scripted(wf, recorder)
    first = run.record_bodies[0]
    assert first.data.var == {
        "target_concentration_mg_ml": 1.0,
        "actual_concentration_mg_ml": 1.0,
    }
    assert first.metadata.protocol_id == "prepare_suspension"
    dilution = next(r for i, r in zip(run.path, run.record_bodies) if i == 3)
    assert dilution.data.var == {"dilution_factor": 2.0, "final_concentration_mg_ml": 0.5}


def test_goal_proposed_when_absent(wf, recorder):
    run = run_scripted(wf, recorder, goal=None)
    assert "diameter" in run.goal
    assert run.status == workflow.ENDED


def test_unrelated_goal_rejected(wf, recorder):
    run = run_scripted(wf, recorder, goal="investigate how cells undergo mitosis")
    assert run.status == workflow.GOAL_REJECTED
    assert run.strategy is None
    assert run.path == [] and run.records == []


def test_goal_without_band_rejected(wf, recorder):
    run = run_scripted(wf, recorder, goal="make the nanotube diameter small")
    assert run.status == workflow.GOAL_REJECTED


def test_step_limit(wf, recorder):
    run = run_scripted(wf, recorder, max_steps=2)
    assert run.status == workflow.LIMIT_REACHED
    assert len(run.path) == 2 == len(run.records)
    assert run.conclusion is not None


def test_trace_shape(wf, recorder):
    run = run_scripted(wf, recorder)
    trace = run.to_trace()
    assert set(trace) == {"goal", "strategy", "path", "records", "phased", "conclusion", "status"}
    assert trace["path"] == run.path and trace["path"] is not run.path
    assert all(rid.startswith("airalogy.id.record.") for rid in trace["records"])


class _RoguePolicy(cnt.CntPolicy):
    def select_next(self, workflow, run):
        return 3 if run.path else 1  # 1 -> 3 has no edge


def test_policy_error_on_non_adjacent(wf, recorder):
    policy = _RoguePolicy()
    with pytest.raises(workflow.PolicyError, match="no edge 1 -> 3"):
        workflow.run_aira(wf, GOAL, policy, cnt.cnt_simulator(), recorder)


class _WrongParamsPolicy(cnt.CntPolicy):
    def set_parameters(self, workflow, run, index):
        return {"bogus": 1}


def test_policy_error_on_wrong_parameters(wf, recorder):
    with pytest.raises(workflow.PolicyError, match="must cover exactly"):
        workflow.run_aira(wf, GOAL, _WrongParamsPolicy(), cnt.cnt_simulator(), recorder)


class _ChattyExecutor(cnt.CntSimulator):
    def execute(self, index, parameters):
        out = super().execute(index, parameters)
        out["extra"] = 1
        return out


def test_executor_error_on_wrong_feedback(wf, recorder):
    with pytest.raises(workflow.ExecutorError, match="feedback"):
        workflow.run_aira(wf, GOAL, cnt.scripted_cnt_policy(), _ChattyExecutor(), recorder)


def test_manifest_must_cover_workflow(wf, recorder):
    class Sparse:
        manifest = {1: cnt.CNT_MANIFEST[1]}

        def execute(self, index, parameters):
            return {}

    with pytest.raises(workflow.ExecutorError, match="misses"):
        workflow.run_aira(wf, GOAL, cnt.scripted_cnt_policy(), Sparse(), recorder)


def test_step_requires_running(wf, recorder):
    run = workflow.start_run(wf, "investigate how cells undergo mitosis", cnt.scripted_cnt_policy())
    assert run.status == workflow.GOAL_REJECTED
    with pytest.raises(ValueError, match="not running"):
        workflow.step_aira(run, cnt.scripted_cnt_policy(), cnt.cnt_simulator(), recorder)


def test_single_step_appends_exactly_one(wf, recorder):
    policy = cnt.scripted_cnt_policy()
    simulator = cnt.cnt_simulator()
    run = workflow.start_run(wf, GOAL, policy)
    assert run.status == workflow.RUNNING
    workflow.step_aira(run, policy, simulator, recorder)
    assert run.path == [1]
    assert len(run.records) == 1 and len(run.phased) == 1
    workflow.step_aira(run, policy, simulator, recorder)
    assert run.path == [1, 2]


def test_determinism(wf, tmp_path):
    runs = []
    for name in ("a", "b"):
        recorder = workflow.RunRecorder(records.RecordStore(tmp_path / name))
        runs.append(run_scripted(wf, recorder))
    assert runs[0].path == runs[1].path
    assert runs[0].phased == runs[1].phased
    assert runs[0].conclusion == runs[1].conclusion
