"""Drive every HTTP endpoint once against a temporary store."""

import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from fastapi.testclient import TestClient

from protoflow.config import ServiceConfig
from protoflow.protocol import zip_protocol_dir
from protoflow.service import create_app

DEMO = Path(__file__).resolve().parent.parent / "demo"


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        app = create_app(ServiceConfig(data_dir=tmp))
        client = TestClient(app)

        r = client.get("/health")
        assert r.status_code == 200 and r.json()["status"] == "ok"

        blob = zip_protocol_dir(DEMO / "solution_prep")
        r = client.post("/protocols", content=blob)
        assert r.status_code == 200, r.text
        identity = r.json()["airalogy_protocol_id"]
        print("uploaded:", identity)

        r = client.get(f"/protocols/{identity}/schema")
        assert r.status_code == 200
        assert r.json()["json_schema"]["title"] == "VarModel"
        assert [e["id"] for e in r.json()["layout"]] == [
            "select_solvent", "solvent_name", "solvent_volume", "check_remaining_volume",
        ]

        r = client.post("/sessions", json={"protocol": identity, "user_id": "user_demo_1"})
        sid = r.json()["session_id"]

        r = client.patch(f"/sessions/{sid}/fields", json={"field_id": "solvent_volume", "value": "abc"})
        assert r.status_code == 200 and r.json()["outcome"] == "violation", r.text

        r = client.post(
            f"/sessions/{sid}/ops",
            json=[
                {"operation": "update", "field_id": "solvent_name", "field_value": "H2O"},
                {"operation": "update", "field_id": "solvent_volume", "field_value": 1.0},
            ],
        )
        acks = r.json()
        assert acks[0]["message"] == "The value of solvent_name has been set to H2O."
        assert acks[1]["message"] == "The value of solvent_volume has been set to 1.0."

        r = client.patch(
            f"/sessions/{sid}/annotations",
            json={"kind": "check", "id": "check_remaining_volume", "checked": True},
        )
        assert r.status_code == 200 and r.json()["checked"] is True

        r = client.post(f"/sessions/{sid}/submit", json={"time": "2024-01-01T00:00:00+08:00"})
        assert r.status_code == 200, r.text
        arid = r.json()["airalogy_record_id"]
        print("record:", arid)

        r = client.post(f"/sessions/{sid}/submit", json={})
        assert r.status_code == 409, r.status_code

        r = client.get(f"/records/{arid}")
        assert r.status_code == 200 and r.json()["data"]["var"]["solvent_name"] == "H2O"

        r = client.get(f"/records/{arid}/report", params={"format": "html"})
        assert r.status_code == 200 and "H2O" in r.text

        source = (DEMO / "cnt" / "workflow.aimd").read_text("utf-8")
        import protoflow.aimd as aimd

        block = aimd.extract_workflow_blocks(aimd.parse_aimd(source))[0]
        r = client.post("/runs", json={"workflow_yaml": block})
        assert r.status_code == 200, r.text
        trace = r.json()
        assert trace["status"] == "ended" and len(trace["records"]) == len(trace["path"])
        print("run:", trace["status"], trace["path"])

        # unknown ids
        assert client.get("/records/airalogy.id.record.00000000-0000-0000-0000-000000000000.v.1").status_code == 404
        assert client.get("/protocols/nope/schema").status_code == 404
        assert client.patch(f"/sessions/{sid}x/fields", json={"field_id": "a", "value": 1}).status_code == 404

    print("service smoke ok")


if __name__ == "__main__":
    main()
