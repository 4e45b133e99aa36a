"""Walk one recording session end to end and print what the engine does.

Covers the demo chain protocol: computed fields fire as their inputs
arrive, the finished record is stored with its integrity digest, a
revision bumps the version, and the record renders as a report.
"""

import json
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from protoflow import report, session
from protoflow.protocol import load_protocol_dir
from protoflow.records import RecordStore, verify_integrity

DEMO = Path(__file__).resolve().parent.parent / "demo"
T0 = "2024-05-01T10:00:00+08:00"
T1 = "2024-05-01T11:30:00+08:00"


def main() -> None:
    bound, diagnostics = load_protocol_dir(DEMO / "field_chain")
    assert not [d for d in diagnostics if d.severity == "error"], diagnostics
    print(f"loaded {bound.ref.airalogy_protocol_id}")
    print(f"fields: {', '.join(bound.schema.var_ids())}")
    print()

    s = session.open_session(bound, "user_demo_1", T0)
    for fid, value in [("f1", 3), ("f4", 2), ("f5", 5), ("f7", 1), ("f9", 9)]:
        outcome = session.set_field(s, fid, value)
        ran = [t for t in outcome.triggered if t.status == "ran"]
        computed = {k: v for t in ran for k, v in t.assigned.items()}
        note = f" -> computed {computed}" if computed else ""
        print(f"set {fid} = {value}{note}")
    print()
    print("states:", json.dumps(s.states, sort_keys=True))

    with tempfile.TemporaryDirectory() as tmp:
        store = RecordStore(tmp)
        record = session.submit(s, store)
        print()
        print("submitted:", record.airalogy_record_id)
        print("sha1:     ", record.metadata.sha1)
        print("intact:   ", verify_integrity(record))

        revised_data = record.data
        revised_data.var["f9"] = 10.0
        revised = store.revise_record(record.record_id, revised_data, "user_demo_2", T1)
        print("revised:  ", revised.airalogy_record_id)
        print("versions: ", store.versions_of(record.record_id))

        doc = report.render_report(bound.aimd_text, bound.json_schema(), revised, "markdown")
        print()
        print(doc.body)


if __name__ == "__main__":
    main()
