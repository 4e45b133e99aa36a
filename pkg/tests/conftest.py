import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
DEMO = ROOT / "demo"
sys.path.insert(0, str(Path(__file__).resolve().parent))

from protoflow.protocol import load_protocol_dir  # noqa: E402
from protoflow.records import RecordStore  # noqa: E402


@pytest.fixture(scope="session")
def demo_dir() -> Path:
    return DEMO


@pytest.fixture(scope="session")
def solution_prep():
    bound, diagnostics = load_protocol_dir(DEMO / "solution_prep")
    assert not [d for d in diagnostics if d.severity == "error"]
    return bound


@pytest.fixture(scope="session")
def pair_sum():
    bound, diagnostics = load_protocol_dir(DEMO / "pair_sum")
    assert not [d for d in diagnostics if d.severity == "error"]
    return bound


@pytest.fixture(scope="session")
def field_chain():
    bound, diagnostics = load_protocol_dir(DEMO / "field_chain")
    assert not [d for d in diagnostics if d.severity == "error"]
    return bound


@pytest.fixture(scope="session")
def cnt_workflow_yaml() -> str:
    from protoflow import aimd

    doc = aimd.parse_aimd((DEMO / "cnt" / "workflow.aimd").read_text("utf-8"))
    return aimd.extract_workflow_blocks(doc)[0]


@pytest.fixture()
def store(tmp_path) -> RecordStore:
    return RecordStore(tmp_path / "data")


SOLUTION_SCHEMA = {
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


@pytest.fixture(scope="session")
def solution_schema() -> dict:
    return {k: v for k, v in SOLUTION_SCHEMA.items()}
