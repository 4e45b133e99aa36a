import hashlib
import json

import pytest

from protoflow import analysis, records, session
from protoflow.protocol import ProtocolRegistry

PROTO_X = "airalogy.id.lab.demo_lab.project.demo_project.protocol.proto_x.v.1.0.0"
PROTO_Y = "airalogy.id.lab.demo_lab.project.demo_project.protocol.proto_y.v.1.0.0"
PROTO_X2 = "airalogy.id.lab.demo_lab.project.demo_project.protocol.proto_x.v.2.0.0"
T0 = "2024-05-01T10:00:00+08:00"

ARTIFACTS = {
    ("proto_x", "1.0.0"): {"markdown": "# X\n{{var|a}}", "field_schema": {"title": "X"}},
    ("proto_y", "1.0.0"): {"markdown": "# Y\n{{var|b}}", "field_schema": {"title": "Y"}},
    ("proto_x", "2.0.0"): {
        "markdown": "# X2\n{{var|a}}",
        "field_schema": {"title": "X2"},
        "model_doc": '[[var]]\nid = "a"\ntype = "integer"\n',
        "assigner_doc": "",
    },
}


def lookup(protocol_id, version):
    return ARTIFACTS[(protocol_id, version)]


def submit_n(store, protocol, n):
    out = []
    for i in range(n):
        out.append(
            store.submit_record(
                protocol, records.RecordData(var={"i": i}), "alice", T0
            )
        )
    return out


def test_dedup_group_counts(tmp_path):
    store = records.RecordStore(tmp_path / "data")
    for n in (1, 5, 50):
        batch = submit_n(store, PROTO_X, n)
        bundle = analysis.build_bundle(batch, lookup)
        assert len(bundle.groups) == 1  # n records, protocol text carried once
        group = bundle.groups[0]
        assert len(group.records) == n
        assert bundle.record_count() == n
        assert group.markdown == "# X\n{{var|a}}"
        payload = bundle.to_json_obj()
        assert json.dumps(payload["groups"][0]["markdown"]).count("{{var|a}}") == 1


def test_grouping_by_first_appearance(tmp_path):
    store = records.RecordStore(tmp_path / "data")
    x1 = submit_n(store, PROTO_X, 1)[0]
    y1 = submit_n(store, PROTO_Y, 1)[0]
    x2 = submit_n(store, PROTO_X, 1)[0]
    bundle = analysis.build_bundle([x1, y1, x2], lookup)
    assert [(g.protocol_id, g.protocol_version) for g in bundle.groups] == [
        ("proto_x", "1.0.0"),
        ("proto_y", "1.0.0"),
    ]
    assert [len(g.records) for g in bundle.groups] == [2, 1]
    assert bundle.groups[0].records == [x1, x2]  # record order preserved


def test_versions_are_distinct_groups(tmp_path):
    store = records.RecordStore(tmp_path / "data")
    old = submit_n(store, PROTO_X, 1)[0]
    new = submit_n(store, PROTO_X2, 1)[0]
    bundle = analysis.build_bundle([old, new], lookup)
    assert [(g.protocol_id, g.protocol_version) for g in bundle.groups] == [
        ("proto_x", "1.0.0"),
        ("proto_x", "2.0.0"),
    ]


def test_include_code_flag(tmp_path):
    store = records.RecordStore(tmp_path / "data")
    batch = submit_n(store, PROTO_X2, 1)
    plain = analysis.build_bundle(batch, lookup)
    assert plain.groups[0].model_doc is None
    assert "model_doc" not in plain.to_json_obj()["groups"][0]

    coded = analysis.build_bundle(batch, lookup, include_code=True)
    assert coded.groups[0].model_doc.startswith("[[var]]")
    obj = coded.to_json_obj()["groups"][0]
    assert "model_doc" in obj and "assigner_doc" in obj


def test_unknown_protocol_surfaces_keyerror(tmp_path):
    store = records.RecordStore(tmp_path / "data")
    ghost = "airalogy.id.lab.demo_lab.project.demo_project.protocol.ghost.v.9.9.9"
    batch = submit_n(store, ghost, 1)
    with pytest.raises(KeyError):
        analysis.build_bundle(batch, lookup)


def test_empty_bundle():
    bundle = analysis.build_bundle([], lookup)
    assert bundle.groups == [] and bundle.record_count() == 0


def test_stub_backend_digest_format(tmp_path):
    store = records.RecordStore(tmp_path / "data")
    bundle = analysis.build_bundle(submit_n(store, PROTO_X, 5), lookup)
    backend = analysis.StubBackend()
    result = backend.analyze(bundle, "compare the volumes", [])
    digest = hashlib.sha1(b"compare the volumes").hexdigest()[:8]
    assert result == f"groups=1; records=5; purpose={digest}"
    assert backend.analyze(bundle, "compare the volumes", []) == result  # deterministic


def test_run_analysis_threads_history(tmp_path):
    store = records.RecordStore(tmp_path / "data")
    bundle = analysis.build_bundle(submit_n(store, PROTO_X, 2), lookup)

    seen_histories = []

    class Spy:
        def analyze(self, bundle, purpose, history):
            seen_histories.append(list(history))
            return f"result for {purpose}"

    turns: list[analysis.AnalysisTurn] = []
    result1, turns1 = analysis.run_analysis(turns, bundle, "first question", Spy())
    assert result1 == "result for first question"
    assert turns == []  # input session untouched
    assert [t.purpose for t in turns1] == ["first question"]

    result2, turns2 = analysis.run_analysis(turns1, bundle, "second question", Spy())
    assert seen_histories[0] == []
    assert seen_histories[1] == [("first question", "result for first question")]
    assert [t.purpose for t in turns2] == ["first question", "second question"]
    assert [t.purpose for t in turns1] == ["first question"]  # still one turn


def test_backend_failure_leaves_session_unchanged(tmp_path):
    store = records.RecordStore(tmp_path / "data")
    bundle = analysis.build_bundle(submit_n(store, PROTO_X, 1), lookup)

    class Boom:
        def analyze(self, bundle, purpose, history):
            raise RuntimeError("backend offline")

    turns = [analysis.AnalysisTurn("earlier", "fine")]
    with pytest.raises(RuntimeError, match="backend offline"):
        analysis.run_analysis(turns, bundle, "next", Boom())
    assert [t.purpose for t in turns] == ["earlier"]


def test_registry_lookup_feeds_bundles(tmp_path, store):
    registry = ProtocolRegistry()
    import shutil

    src = None
    for candidate in ("demo/solution_prep",):
        src = candidate
    shutil.copytree(src, tmp_path / "solution_prep")
    bound, diagnostics = registry.register_dir(tmp_path / "solution_prep")
    assert not [d for d in diagnostics if d.severity == "error"]

    s = session.open_session(registry.get(bound.ref.airalogy_protocol_id), now=T0)
    session.set_field(s, "solvent_name", "H2O")
    session.set_field(s, "solvent_volume", 1.0)
    session.annotate(s, "check", "check_remaining_volume", checked=True)
    record = session.submit(s, store)

    bundle = analysis.build_bundle([record], registry.lookup, include_code=True)
    group = bundle.groups[0]
    assert group.protocol_id == "solution_preparation"
    assert "{{var|solvent_name}}" in group.markdown
    assert group.field_schema["properties"]["solvent_volume"]["exclusiveMinimum"] == 0.0
    assert "solvent_volume" in group.model_doc

    result, _ = analysis.run_analysis([], bundle, "summarize", analysis.StubBackend())
    assert result.startswith("groups=1; records=1; purpose=")
