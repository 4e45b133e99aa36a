"""Command line: protocol checking, schema export, report rendering, runs, serving."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import aimd, cnt, report, workflow
from .config import load_config
from .diagnostics import has_errors, to_json_lines
from .protocol import load_protocol_dir
from .records import AiralogyRecord, RecordStore

OK = 0
CONTENT_ERROR = 1
IO_ERROR = 2


def _emit_diagnostics(diagnostics) -> None:
    text = to_json_lines(diagnostics)
    if text:
        print(text, file=sys.stderr)


def cmd_check(args) -> int:
    try:
        bound, diagnostics = load_protocol_dir(args.protocol_dir)
    except FileNotFoundError as e:
        print(str(e), file=sys.stderr)
        return IO_ERROR
    except OSError as e:
        print(str(e), file=sys.stderr)
        return IO_ERROR
    _emit_diagnostics(diagnostics)
    return CONTENT_ERROR if has_errors(diagnostics) else OK


def cmd_schema(args) -> int:
    try:
        bound, diagnostics = load_protocol_dir(args.protocol_dir)
    except OSError as e:
        print(str(e), file=sys.stderr)
        return IO_ERROR
    _emit_diagnostics(diagnostics)
    if has_errors(diagnostics):
        return CONTENT_ERROR
    print(json.dumps(bound.json_schema(), indent=2, sort_keys=True, ensure_ascii=False))
    return OK


def cmd_render(args) -> int:
    try:
        bound, diagnostics = load_protocol_dir(args.protocol_dir)
        record_text = Path(args.record_file).read_text("utf-8")
    except OSError as e:
        print(str(e), file=sys.stderr)
        return IO_ERROR
    _emit_diagnostics(diagnostics)
    if has_errors(diagnostics):
        return CONTENT_ERROR
    try:
        record = AiralogyRecord.from_json_obj(json.loads(record_text))
    except (ValueError, KeyError) as e:
        print(f"bad record file: {e}", file=sys.stderr)
        return CONTENT_ERROR
    try:
        doc = report.render_report(
            bound.aimd_text, bound.json_schema(), record, args.format
        )
    except report.ReportError as e:
        print(str(e), file=sys.stderr)
        return CONTENT_ERROR
    for w in doc.warnings:
        print(w, file=sys.stderr)
    ext = "html" if args.format == report.HTML else "md"
    out = Path(args.out) if args.out else Path(args.record_file).with_suffix(f".report.{ext}")
    try:
        out.write_text(doc.body, "utf-8")
    except OSError as e:
        print(str(e), file=sys.stderr)
        return IO_ERROR
    print(str(out))
    return OK


def cmd_aira(args) -> int:
    try:
        source = Path(args.workflow_file).read_text("utf-8")
    except OSError as e:
        print(str(e), file=sys.stderr)
        return IO_ERROR
    if args.workflow_file.endswith(".aimd"):
        doc = aimd.parse_aimd(source)
        blocks = aimd.extract_workflow_blocks(doc)
        if not blocks:
            print("no workflow block in the markdown file", file=sys.stderr)
            return CONTENT_ERROR
        source = blocks[0]
    try:
        wf = workflow.parse_workflow(source)
    except workflow.WorkflowError as e:
        print(str(e), file=sys.stderr)
        return CONTENT_ERROR
    if args.policy != "scripted-cnt":
        print(f"unknown policy: {args.policy}", file=sys.stderr)
        return CONTENT_ERROR
    config = load_config({"data_dir": args.data_dir})
    store = RecordStore(config.data_dir)
    recorder = workflow.RunRecorder(store)
    try:
        state = workflow.run_aira(
            wf,
            args.goal,
            cnt.scripted_cnt_policy(),
            cnt.cnt_simulator(),
            recorder,
            max_steps=args.max_steps,
        )
    except (workflow.PolicyError, workflow.ExecutorError) as e:
        print(str(e), file=sys.stderr)
        return CONTENT_ERROR
    print(json.dumps(state.to_trace(), indent=2, ensure_ascii=False))
    return OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = load_config(
        {"host": args.host, "port": args.port, "data_dir": args.data_dir}
    )
    try:
        app = create_app(config)
    except RuntimeError as e:
        print(str(e), file=sys.stderr)
        return IO_ERROR
    uvicorn.run(app, host=config.host, port=config.port)
    return OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="protoflow",
        description="Protocol engine: check, export, render, automate, serve.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="validate a protocol directory")
    p.add_argument("protocol_dir")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("schema", help="print the field JSON Schema")
    p.add_argument("protocol_dir")
    p.set_defaults(func=cmd_schema)

    p = sub.add_parser("render", help="render a record report")
    p.add_argument("protocol_dir")
    p.add_argument("record_file")
    p.add_argument("--format", choices=[report.HTML, report.MARKDOWN], default=report.HTML)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("aira", help="run an automation loop over a workflow")
    p.add_argument("workflow_file")
    p.add_argument("--goal", default=None)
    p.add_argument("--policy", default="scripted-cnt")
    p.add_argument("--max-steps", type=int, default=64)
    p.add_argument("--data-dir", default=None)
    p.set_defaults(func=cmd_aira)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--data-dir", default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
