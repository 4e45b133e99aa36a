import json
from pathlib import Path

import pytest

from protoflow import cli, records, session

DEMO = str(Path(__file__).resolve().parent.parent / "demo" / "solution_prep")
CNT_AIMD = str(Path(__file__).resolve().parent.parent / "demo" / "cnt" / "workflow.aimd")


def make_record_file(tmp_path, solution_prep, var=None):
    store = records.RecordStore(tmp_path / "store")
    s = session.open_session(solution_prep, user_id="alice", now="2024-05-01T10:00:00+08:00")
    for fid, value in (var or {"solvent_name": "H2O", "solvent_volume": 1.0}).items():
        session.set_field(s, fid, value)
    session.annotate(s, "check", "check_remaining_volume", checked=True)
    record = session.submit(s, store)
    path = tmp_path / "record.json"
    path.write_text(json.dumps(record.to_json_obj(), indent=2), "utf-8")
    return path


def test_check_ok(capsys):
    assert cli.main(["check", DEMO]) == cli.OK
    out = capsys.readouterr()
    assert out.out == "" and out.err == ""


def test_check_content_error_emits_json_lines(tmp_path, capsys):
    d = tmp_path / "broken"
    d.mkdir()
    (d / "protocol.aimd").write_text("{{var|a}} {{var|a}} {{step|s, 3}}\n", "utf-8")
    assert cli.main(["check", str(d)]) == cli.CONTENT_ERROR
    err_lines = [l for l in capsys.readouterr().err.splitlines() if l]
    assert len(err_lines) >= 2
    for line in err_lines:
        obj = json.loads(line)
        assert set(obj) == {"severity", "message", "start", "end"}
    assert any("duplicate" in json.loads(l)["message"] for l in err_lines)


def test_check_warning_only_is_ok(tmp_path, capsys):
    d = tmp_path / "warned"
    d.mkdir()
    (d / "protocol.aimd").write_text("{{var|a}}\n", "utf-8")
    assert cli.main(["check", str(d)]) == cli.OK  # missing-id fallback warns
    err = capsys.readouterr().err
    assert json.loads(err.splitlines()[0])["severity"] == "warning"


def test_check_missing_dir(tmp_path, capsys):
    assert cli.main(["check", str(tmp_path / "nope")]) == cli.IO_ERROR
    assert "protocol.aimd" in capsys.readouterr().err


def test_schema_stdout(capsys, solution_schema):
    assert cli.main(["schema", DEMO]) == cli.OK
    out = capsys.readouterr().out
    assert json.loads(out) == solution_schema


def test_schema_broken(tmp_path, capsys):
    d = tmp_path / "broken"
    d.mkdir()
    (d / "protocol.aimd").write_text("{{var|a}} {{var|a}}\n", "utf-8")
    assert cli.main(["schema", str(d)]) == cli.CONTENT_ERROR
    assert capsys.readouterr().out == ""


def test_render_default_output(tmp_path, capsys, solution_prep):
    record_file = make_record_file(tmp_path, solution_prep)
    assert cli.main(["render", DEMO, str(record_file)]) == cli.OK
    printed = capsys.readouterr().out.strip()
    out_path = tmp_path / "record.report.html"
    assert printed == str(out_path)
    body = out_path.read_text("utf-8")
    assert "H2O" in body and "Check passed" in body
    assert body.startswith("<!DOCTYPE html>")


def test_render_markdown_and_out(tmp_path, capsys, solution_prep):
    record_file = make_record_file(tmp_path, solution_prep)
    target = tmp_path / "custom.md"
    code = cli.main(
        ["render", DEMO, str(record_file), "--format", "markdown", "--out", str(target)]
    )
    assert code == cli.OK
    assert capsys.readouterr().out.strip() == str(target)
    assert target.read_text("utf-8").startswith("> Record: ")

    assert cli.main(["render", DEMO, str(record_file), "--format", "markdown"]) == cli.OK
    assert (tmp_path / "record.report.md").is_file()


def test_render_warning_on_missing_value(tmp_path, capsys, solution_prep):
    record_file = make_record_file(tmp_path, solution_prep)
    obj = json.loads(record_file.read_text("utf-8"))
    del obj["data"]["var"]["solvent_volume"]
    record_file.write_text(json.dumps(obj), "utf-8")
    assert cli.main(["render", DEMO, str(record_file)]) == cli.OK
    assert "no value recorded for var solvent_volume" in capsys.readouterr().err


def test_render_stray_id_fails(tmp_path, capsys, solution_prep):
    record_file = make_record_file(tmp_path, solution_prep)
    obj = json.loads(record_file.read_text("utf-8"))
    obj["data"]["var"]["mystery"] = 1
    record_file.write_text(json.dumps(obj), "utf-8")
    assert cli.main(["render", DEMO, str(record_file)]) == cli.CONTENT_ERROR
    assert "mystery" in capsys.readouterr().err


def test_render_bad_record_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", "utf-8")
    assert cli.main(["render", DEMO, str(bad)]) == cli.CONTENT_ERROR
    assert "bad record file" in capsys.readouterr().err

    assert cli.main(["render", DEMO, str(tmp_path / "absent.json")]) == cli.IO_ERROR


def test_aira_trace(tmp_path, capsys):
    code = cli.main(
        [
            "aira",
            CNT_AIMD,
            "--goal",
            "disperse carbon nanotubes to a diameter within 10-30 nm",
            "--data-dir",
            str(tmp_path / "data"),
        ]
    )
    assert code == cli.OK
    trace = json.loads(capsys.readouterr().out)
    assert trace["status"] == "ended"
    assert trace["path"] == [1, 2, 4, 2, 4, 2, 4, 3, 2, 4, 2, 4]
    assert len(trace["records"]) == len(trace["path"])
    stored = list((tmp_path / "data" / "records").glob("*.json"))
    assert len(stored) == len(trace["path"])


def test_aira_respects_max_steps(tmp_path, capsys):
    code = cli.main(
        [
            "aira",
            CNT_AIMD,
            "--goal",
            "disperse carbon nanotubes to a diameter within 10-30 nm",
            "--max-steps",
            "3",
            "--data-dir",
            str(tmp_path / "data"),
        ]
    )
    assert code == cli.OK
    trace = json.loads(capsys.readouterr().out)
    assert trace["status"] == "limit_reached" and len(trace["path"]) == 3


def test_aira_rejections(tmp_path, capsys):
    assert cli.main(["aira", str(tmp_path / "missing.yaml")]) == cli.IO_ERROR

    plain = tmp_path / "plain.aimd"
    plain.write_text("no workflow here\n", "utf-8")
    assert cli.main(["aira", str(plain)]) == cli.CONTENT_ERROR
    assert "no workflow block" in capsys.readouterr().err

    bad = tmp_path / "bad.yaml"
    bad.write_text("id: [broken\n", "utf-8")
    assert cli.main(["aira", str(bad)]) == cli.CONTENT_ERROR

    assert (
        cli.main(
            ["aira", CNT_AIMD, "--policy", "llm", "--data-dir", str(tmp_path)]
        )
        == cli.CONTENT_ERROR
    )
    assert "unknown policy" in capsys.readouterr().err


def test_parser_requires_command(capsys):
    with pytest.raises(SystemExit):
        cli.main([])
