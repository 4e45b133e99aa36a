import uuid

import pytest

from protoflow import records, report, session
from protoflow.records import RecordData, StepCheckData

SOLUTION_AIMD_PATH = "demo/solution_prep/protocol.aimd"


def make_record(var=None, step=None, check=None, protocol_id="solution_preparation"):
    data = RecordData(
        var=dict(var or {}),
        step={k: StepCheckData(**v) for k, v in (step or {}).items()},
        check={k: StepCheckData(**v) for k, v in (check or {}).items()},
    )
    rid = str(uuid.uuid4())
    metadata = records.RecordMetadata(
        airalogy_protocol_id=(
            f"airalogy.id.lab.demo_lab.project.demo_project.protocol.{protocol_id}.v.1.0.0"
        ),
        lab_id="demo_lab",
        project_id="demo_project",
        protocol_id=protocol_id,
        protocol_version="1.0.0",
        record_num=1,
        record_current_version_submission_time="2024-05-01T10:00:00+08:00",
        record_current_version_submission_user_id="alice",
        record_initial_version_submission_time="2024-05-01T10:00:00+08:00",
        record_initial_version_submission_user_id="alice",
        sha1=records.compute_sha1(data),
    )
    return records.AiralogyRecord(
        airalogy_record_id=records.record_id_string(rid, 1)
        if hasattr(records, "record_id_string")
        else f"airalogy.id.record.{rid}.v.1",
        record_id=rid,
        record_version=1,
        metadata=metadata,
        data=data,
    )


@pytest.fixture(scope="module")
def solution_aimd(solution_prep):
    return solution_prep.aimd_text


@pytest.fixture()
def solution_record():
    return make_record(
        var={"solvent_name": "H2O", "solvent_volume": 1.0},
        step={"select_solvent": {"annotation": "", "checked": None}},
        check={"check_remaining_volume": {"annotation": "", "checked": True}},
    )


def test_html_report_golden_bits(solution_aimd, solution_schema, solution_record):
    doc = report.render_report(solution_aimd, solution_schema, solution_record, report.HTML)
    assert doc.format == report.HTML
    assert doc.warnings == []
    body = doc.body
    assert '<span class="af-var" data-field="solvent_name">H2O</span>' in body
    assert '<span class="af-var" data-field="solvent_volume">1</span>' in body  # 1.0 -> "1"
    assert report.CHECK_PASSED in body
    assert report.TO_BE_CHECKED not in body  # the only check is reviewed
    assert '<span class="af-step" data-field="select_solvent">1.</span>' in body
    # metadata header
    assert solution_record.airalogy_record_id in body
    assert solution_record.metadata.sha1 in body
    assert "alice" in body
    assert "<script" not in body.lower()


def test_markdown_report(solution_aimd, solution_schema, solution_record):
    doc = report.render_report(solution_aimd, solution_schema, solution_record, report.MARKDOWN)
    body = doc.body
    assert "H2O" in body
    assert "**1.**" in body
    assert f"[{report.CHECK_PASSED}]" in body
    assert body.startswith("> Record: ")
    assert "<span" not in body


def test_check_states_and_annotations(solution_aimd, solution_schema):
    record = make_record(
        var={"solvent_name": "EtOH", "solvent_volume": 0.5},
        step={"select_solvent": {"annotation": "switched to ethanol", "checked": None}},
        check={"check_remaining_volume": {"annotation": "ran short", "checked": False}},
    )
    body = report.render_report(solution_aimd, solution_schema, record, report.HTML).body
    assert report.CHECK_FAILED in body
    assert "af-failed" in body
    assert '<span class="af-note">switched to ethanol</span>' in body
    assert '<span class="af-note">ran short</span>' in body

    md = report.render_report(solution_aimd, solution_schema, record, report.MARKDOWN).body
    assert "[Check failed] *ran short*" in md
    assert "*switched to ethanol*" in md


def test_stray_record_id_is_an_error(solution_aimd, solution_schema):
    record = make_record(var={"solvent_name": "H2O", "mystery": 1})
    with pytest.raises(report.ReportError, match="record ids missing .*var mystery"):
        report.render_report(solution_aimd, solution_schema, record, report.HTML)

    record = make_record(check={"ghost_check": {"annotation": "", "checked": True}})
    with pytest.raises(report.ReportError, match="check ghost_check"):
        report.render_report(solution_aimd, solution_schema, record, report.HTML)


def test_missing_value_warns_with_empty_slot(solution_aimd, solution_schema):
    record = make_record(var={"solvent_name": "H2O"})
    doc = report.render_report(solution_aimd, solution_schema, record, report.HTML)
    assert "no value recorded for var solvent_volume" in doc.warnings
    assert "no state recorded for step select_solvent" in doc.warnings
    assert '<span class="af-var af-empty" data-field="solvent_volume"></span>' in doc.body
    assert report.TO_BE_CHECKED in doc.body  # missing check state shows as unreviewed


def test_null_value_renders_empty_without_warning(solution_aimd, solution_schema):
    record = make_record(
        var={"solvent_name": "H2O", "solvent_volume": None},
        step={"select_solvent": {"annotation": "", "checked": None}},
        check={"check_remaining_volume": {"annotation": "", "checked": None}},
    )
    doc = report.render_report(solution_aimd, solution_schema, record, report.HTML)
    assert doc.warnings == []
    assert 'af-empty" data-field="solvent_volume"' in doc.body


def test_html_escapes_values(solution_aimd, solution_schema):
    record = make_record(
        var={"solvent_name": "<script>alert(1)</script>", "solvent_volume": 1.0},
        step={"select_solvent": {"annotation": "<b>bold</b>", "checked": None}},
        check={"check_remaining_volume": {"annotation": "", "checked": None}},
    )
    body = report.render_report(solution_aimd, solution_schema, record, report.HTML).body
    assert "<script>" not in body
    assert "&lt;script&gt;" in body
    assert "&lt;b&gt;bold&lt;/b&gt;" in body


def test_determinism(solution_aimd, solution_schema, solution_record):
    first = report.render_report(solution_aimd, solution_schema, solution_record, report.HTML)
    second = report.render_report(solution_aimd, solution_schema, solution_record, report.HTML)
    assert first.body == second.body


def test_no_assigner_evaluation(field_chain):
    # record claims f8=999 although the rules would compute 21; the report
    # must show the stored value untouched, proving nothing was evaluated
    record = make_record(
        var={f"f{i}": float(i) for i in range(1, 8)} | {"f8": 999.0, "f9": None},
        protocol_id="field_chain",
    )
    body = report.render_report(
        field_chain.aimd_text, field_chain.json_schema(), record, report.HTML
    ).body
    assert 'data-field="f8">999</span>' in body


def test_plugin_protocol_renders_without_invocations(tmp_path):
    from protoflow import protocol as protocol_mod

    d = tmp_path / "plugged"
    d.mkdir()
    (d / "protocol.aimd").write_text("{{var|a}} {{var|b}}\n", "utf-8")
    (d / "model.toml").write_text(
        '[[var]]\nid = "a"\ntype = "integer"\n[[var]]\nid = "b"\ntype = "integer"\n', "utf-8"
    )
    (d / "assigners.toml").write_text(
        '[[assigner]]\nid = "p"\nassigned_fields = ["b"]\n'
        'dependent_fields = ["a"]\nplugin = "counter"\n',
        "utf-8",
    )
    (d / "protocol.toml").write_text('[airalogy_protocol]\nid = "plugged"\n', "utf-8")

    calls = []

    def counter(env):
        calls.append(env)
        return {"b": 1}

    bound, _ = protocol_mod.load_protocol_dir(d, plugins={"counter": counter})
    record = make_record(var={"a": 2, "b": 1}, protocol_id="plugged")
    doc = report.render_report(bound.aimd_text, bound.json_schema(), record, report.HTML)
    assert calls == []  # rendering never ran the plugin
    assert ">2<" in doc.body


def test_unknown_format_rejected(solution_aimd, solution_schema, solution_record):
    with pytest.raises(report.ReportError, match="unknown format"):
        report.render_report(solution_aimd, solution_schema, solution_record, "pdf")


def test_check_label():
    assert report.check_label(None) == "To be checked"
    assert report.check_label(True) == "Check passed"
    assert report.check_label(False) == "Check failed"


def test_format_number():
    assert report.format_number(1.0) == "1"
    assert report.format_number(2.5) == "2.5"
    assert report.format_number(5000) == "5000"
    assert report.format_number(-3.0) == "-3"


@pytest.mark.parametrize(
    "value,entry,fragment",
    [
        (5000, {"type": "integer"}, "5000"),
        (1.0, {"type": "number"}, "1"),
        (True, {"type": "boolean"}, "true"),
        ("plain", {"type": "string"}, "plain"),
        (
            "uploads/gel.png",
            {"type": "string", "format": "af-file:image"},
            '<a class="af-file af-file-image" href="uploads/gel.png">uploads/gel.png</a>',
        ),
        (
            "airalogy.id.record.01234567-0123-0123-0123-0123456789ab.v.1",
            {"type": "string", "format": "af-record-ref"},
            "<code>airalogy.id.record.",
        ),
        (["a", "b"], {"type": "array", "items": {"type": "string"}}, "<ul><li>a</li><li>b</li></ul>"),
    ],
)
def test_render_field_html(value, entry, fragment):
    assert fragment in report.render_field(value, entry, report.HTML)


def test_render_field_table():
    entry = {
        "type": "array",
        "items": {
            "type": "object",
            "properties": {"sample": {"type": "string"}, "verdict": {"type": "string"}},
        },
    }
    rows = [
        {"sample": "s1", "verdict": "Qualified"},
        {"sample": "s2", "verdict": "Disqualified"},
        {"sample": "s3", "verdict": "Qualified"},
    ]
    html = report.render_field(rows, entry, report.HTML)
    assert html.count("<tr>") == 4  # header + 3 rows
    assert "Qualified" in html and "Disqualified" in html
    md = report.render_field(rows, entry, report.MARKDOWN)
    assert md.splitlines()[0] == "| sample | verdict |"
    assert len(md.splitlines()) == 5


def test_render_field_mismatch_is_inline():
    out = report.render_field("not a number", {"type": "number"}, report.HTML)
    assert 'class="af-error"' in out and "does not fit type number" in out
    out = report.render_field({"a": 1}, {"type": "string"}, report.MARKDOWN)
    assert out.startswith("[value") and "does not fit" in out


def test_render_field_empty_and_markdown_list():
    assert report.render_field(None, {"type": "string"}, report.HTML) == ""
    assert report.render_field(["x", "y"], {"type": "array", "items": {"type": "string"}}, report.MARKDOWN) == "x; y"


def test_var_ids_appear_exactly_once(solution_aimd, solution_schema, solution_record):
    body = report.render_report(
        solution_aimd, solution_schema, solution_record, report.HTML
    ).body
    for fid in ("solvent_name", "solvent_volume"):
        assert body.count(f'data-field="{fid}"') == 1


def test_report_of_submitted_session_round_trip(solution_prep, store):
    s = session.open_session(solution_prep, user_id="bob", now="2024-05-01T10:00:00+08:00")
    session.set_field(s, "solvent_name", "H2O")
    session.set_field(s, "solvent_volume", 1.0)
    session.annotate(s, "check", "check_remaining_volume", checked=True)
    record = session.submit(s, store)
    doc = report.render_report(
        solution_prep.aimd_text, solution_prep.json_schema(), record, report.HTML
    )
    assert doc.warnings == []
    assert "H2O" in doc.body and record.metadata.sha1 in doc.body
