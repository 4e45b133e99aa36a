"""Run the scripted nanotube-dispersion automation and narrate each step.

Usage: python3 scripts/run_cnt_demo.py [--data-dir DIR]
Records land in DIR (a temporary directory by default) so the run can be
inspected afterwards with the `render` CLI command.
"""

import argparse
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from protoflow import aimd, cnt, workflow
from protoflow.records import RecordStore

DEMO = Path(__file__).resolve().parent.parent / "demo"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data-dir", help="where to store the run's records")
    args = parser.parse_args()

    source = (DEMO / "cnt" / "workflow.aimd").read_text("utf-8")
    wf = workflow.parse_workflow(aimd.extract_workflow_blocks(aimd.parse_aimd(source))[0])

    if args.data_dir:
        run_in(wf, Path(args.data_dir))
    else:
        with tempfile.TemporaryDirectory() as tmp:
            run_in(wf, Path(tmp))


def run_in(wf: workflow.WorkflowDef, data_dir: Path) -> None:
    recorder = workflow.RunRecorder(RecordStore(data_dir))
    state = workflow.run_aira(
        wf, None, cnt.scripted_cnt_policy(), cnt.cnt_simulator(), recorder
    )

    print(f"workflow: {wf.title or wf.id}")
    print(f"goal:     {state.goal}")
    print(f"strategy: {state.strategy}")
    print()
    names = {p.protocol_index: p.protocol_name for p in wf.protocols}
    for i, idx in enumerate(state.path):
        body = state.record_bodies[i]
        values = ", ".join(f"{k}={v}" for k, v in body.data.var.items())
        print(f"step {i + 1:>2}  [{idx}] {names[idx]:<22} {values}")
        print(f"         {state.phased[i]}")
    print()
    print(f"status:     {state.status}")
    print(f"conclusion: {state.conclusion}")
    print(f"records:    {len(state.records)} stored under {data_dir}")


if __name__ == "__main__":
    main()
