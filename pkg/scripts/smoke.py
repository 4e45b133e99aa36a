"""Quick end-to-end exercise of the whole engine against the demo fixtures."""

import json
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from protoflow import aimd, cnt, report, session, workflow
from protoflow.protocol import load_protocol_dir
from protoflow.records import RecordStore, RecordValidationError

DEMO = Path(__file__).resolve().parent.parent / "demo"


def main() -> None:
    # parse + bind all demo protocols
    for name in ("solution_prep", "pair_sum", "field_chain"):
        bound, diagnostics = load_protocol_dir(DEMO / name)
        errors = [d for d in diagnostics if d.severity == "error"]
        assert not errors, (name, errors)
        print(f"{name}: {len(bound.doc.decls)} decls, schema ok")

    # schema golden shape
    bound, _ = load_protocol_dir(DEMO / "solution_prep")
    schema = bound.json_schema()
    expected = {
        "properties": {
            "solvent_name": {"title": "Solvent Name", "type": "string"},
            "solvent_volume": {
                "exclusiveMinimum": 0.0,
                "title": "Solvent Volume",
                "type": "number",
            },
        },
        "required": ["solvent_name", "solvent_volume"],
        "title": "VarModel",
        "type": "object",
    }
    assert schema == expected, json.dumps(schema, indent=2)
    print("schema golden ok")

    with tempfile.TemporaryDirectory() as tmp:
        store = RecordStore(tmp)

        # pair_sum cross validation
        pair, _ = load_protocol_dir(DEMO / "pair_sum")
        s = session.open_session(pair, "demo_user", "2024-01-01T00:00:00+08:00")
        assert session.set_field(s, "a", 4).ok
        assert session.set_field(s, "b", 5).ok
        record = session.submit(s, store)
        print("pair_sum accepted (4,5):", record.airalogy_record_id)

        s2 = session.open_session(pair, "demo_user", "2024-01-01T00:00:00+08:00")
        session.set_field(s2, "a", 5)
        session.set_field(s2, "b", 5)
        try:
            session.submit(s2, store)
            raise AssertionError("should reject 5+5")
        except RecordValidationError as e:
            msgs = [v.message for v in e.violations]
            assert "a + b must less than 10" in msgs, msgs
            print("pair_sum rejected (5,5) with exact message")

        # field_chain walkthrough
        chain, _ = load_protocol_dir(DEMO / "field_chain")
        cs = session.open_session(chain, "demo_user", "2024-01-01T00:00:00+08:00")
        out1 = session.set_field(cs, "f1", 3)
        assert [t.assigner_id for t in out1.triggered if t.status == "ran"] == ["a1"]
        out2 = session.set_field(cs, "f4", 2)
        assert not [t for t in out2.triggered if t.status == "ran"]
        out3 = session.set_field(cs, "f5", 5)
        assert [t.assigner_id for t in out3.triggered if t.status == "ran"] == ["a2"]
        out4 = session.set_field(cs, "f7", 1)
        assert [t.assigner_id for t in out4.triggered if t.status == "ran"] == ["a3"]
        assert cs.states["f8"] == 21.0, cs.states
        print("field_chain walkthrough ok, f8 =", cs.states["f8"])

        # ops protocol
        ops_session = session.open_session(pair, "demo_user", "2024-01-01T00:00:00+08:00")
        acks = session.apply_ops(
            ops_session,
            [
                {"operation": "update", "field_id": "a", "field_value": 4},
                {"operation": "update", "field_id": "b", "field_value": 5},
            ],
        )
        assert acks[0].message == "The value of a has been set to 4."
        assert session.final_response(acks) == (
            "The value of a has been set to 4. The value of b has been set to 5."
        )
        print("ops protocol ok")

        # report rendering
        doc = report.render_report(bound.aimd_text, schema, _solution_record(store, bound), "html")
        assert "H2O" in doc.body and "Check passed" in doc.body
        print("report html ok,", len(doc.body), "bytes")

        # CNT automation
        source = (DEMO / "cnt" / "workflow.aimd").read_text("utf-8")
        wf_doc = aimd.parse_aimd(source)
        wf = workflow.parse_workflow(aimd.extract_workflow_blocks(wf_doc)[0])
        recorder = workflow.RunRecorder(store)
        state = workflow.run_aira(
            wf, None, cnt.scripted_cnt_policy(), cnt.cnt_simulator(), recorder
        )
        print("cnt status:", state.status)
        print("cnt path:  ", state.path)
        assert state.status == workflow.ENDED
        assert state.path == [1, 2, 4, 2, 4, 2, 4, 3, 2, 4, 2, 4], state.path
        sizes = [
            state.record_bodies[i].data.var["average_diameter_nm"]
            for i, idx in enumerate(state.path)
            if idx == 4
        ]
        assert sizes == [150.0, 80.0, 80.0, 40.0, 25.0], sizes
        print("cnt observations:", sizes)

    print("smoke ok")


def _solution_record(store, bound):
    s = session.open_session(bound, "user_demo_1", "2024-01-01T00:00:00+08:00")
    session.set_field(s, "solvent_name", "H2O")
    session.set_field(s, "solvent_volume", 1.0)
    session.annotate(s, "check", "check_remaining_volume", checked=True)
    return session.submit(s, store)


if __name__ == "__main__":
    main()
