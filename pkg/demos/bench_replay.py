"""
Scoring a small benchmark from recorded replies
===============================================

Five MBPP-style tasks, one recorded reply each. Three of the programs pass
their tests and two do not, so pass@1 is 0.6. The same run with one worker and
with four gives the same records once timing is set aside.
"""

import json
import tempfile
from pathlib import Path

from ralu.harness import load_dataset, run_benchmark
from ralu.llm import ReplayBackend

bench = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "bench5"
tasks = load_dataset(bench / "mbpp5.jsonl", "mbpp")


def client_for(task):
    return ReplayBackend.from_file(bench / "replay" / f"{task.id}.jsonl")


with tempfile.TemporaryDirectory() as tmp:
    runs = {}
    for workers in (1, 4):
        report = run_benchmark(tasks, "direct", client_for, workers=workers, out_dir=Path(tmp) / f"w{workers}")
        runs[workers] = [r.to_dict(timing=False) for r in report.records]

    for r in report.records:
        print(f"{r.task_id:>5}  {'pass' if r.passed else 'fail':4}  {r.failure or ''}")
    print(json.dumps(report.summary, indent=2))
    print("identical across worker counts:", runs[1] == runs[4])
