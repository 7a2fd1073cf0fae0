"""Benchmark runner: one strategy over many tasks, bounded parallelism, JSONL report."""

from __future__ import annotations

import json
import logging
import re
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from ralu.errors import RaluError
from ralu.harness.datasets import Task
from ralu.harness.evaluate import evaluate_code, evaluate_math
from ralu.harness.strategies import PipelineConfig, normalize_strategy, solve_task
from ralu.llm import ChatClient, LLMError, SessionClient
from ralu.synthesis import CODEGEN, ExtractionError

logger = logging.getLogger(__name__)

TIMING_FIELDS = ("wall_ms",)


class EmptyTaskSet(RaluError):
    pass


@dataclass
class RunRecord:
    task_id: str
    strategy: str
    passed: bool
    final_output: str
    llm_calls: int
    prompt_tokens: int
    completion_tokens: int
    wall_ms: float
    degraded: list[str] = field(default_factory=list)
    failure: str | None = None
    trace_path: str | None = None

    def to_dict(self, timing: bool = True) -> dict:
        d = asdict(self)
        if not timing:
            for key in TIMING_FIELDS:
                d.pop(key, None)
        return d


@dataclass
class RunReport:
    records: list[RunRecord]
    summary: dict


def task_sort_key(task_id: str):
    """Natural ordering: ``HumanEval/2`` before ``HumanEval/10``."""
    return [(0, int(part), "") if part.isdigit() else (1, 0, part) for part in re.split(r"(\d+)", task_id)]


def safe_name(task_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", task_id)


def run_task(
    task: Task,
    strategy: str,
    llm: ChatClient,
    config: PipelineConfig | None = None,
    trace_dir: Path | None = None,
) -> RunRecord:
    """Solve and score one task; errors become a failed record, never an exception."""
    config = config or PipelineConfig()
    session = SessionClient(llm)
    started = time.perf_counter()
    passed, output, failure, degraded = False, "", None, []
    try:
        outcome = solve_task(task, strategy, session, config)
        output, degraded = outcome.final_output, list(outcome.degraded)
        if task.kind == CODEGEN:
            result = evaluate_code(output, task, config.sandbox)
            passed, failure = result.passed, result.reason
        else:
            passed = evaluate_math(output, task.gold_answer)
            failure = None if passed else "wrong_answer"
    except ExtractionError as exc:
        failure = type(exc).__name__
    except LLMError as exc:
        failure = f"llm_error:{type(exc).__name__}"
    except RaluError as exc:
        failure = type(exc).__name__
        if getattr(exc, "__cause__", None) is not None and isinstance(exc.__cause__, LLMError):
            failure = f"llm_error:{type(exc.__cause__).__name__}"
    except Exception as exc:  # a broken task must not abort the run
        logger.exception("task %s crashed", task.id)
        failure = f"crash:{type(exc).__name__}"
    wall_ms = (time.perf_counter() - started) * 1000.0
    trace_path = None
    if trace_dir is not None:
        trace_dir.mkdir(parents=True, exist_ok=True)
        trace_file = trace_dir / f"{safe_name(task.id)}.jsonl"
        session.write_trace(trace_file)
        trace_path = f"{trace_dir.name}/{trace_file.name}"
    prompt_tokens, completion_tokens, calls = session.usage.report()
    return RunRecord(
        task_id=task.id,
        strategy=normalize_strategy(strategy),
        passed=passed,
        final_output=output,
        llm_calls=calls,
        prompt_tokens=prompt_tokens,
        completion_tokens=completion_tokens,
        wall_ms=round(wall_ms, 3),
        degraded=degraded,
        failure=failure,
        trace_path=trace_path,
    )


def summarize(records: Sequence[RunRecord], tasks: Sequence[Task], strategy: str) -> dict:
    n = len(records)
    kinds = {t.kind for t in tasks}
    metric = "pass@1" if kinds == {CODEGEN} else "accuracy" if CODEGEN not in kinds else "score"
    passed = sum(r.passed for r in records)
    failures = Counter(r.failure or "unknown" for r in records if not r.passed)
    return {
        "strategy": normalize_strategy(strategy),
        "metric": metric,
        "tasks": n,
        "passed": passed,
        "score": passed / n if n else 0.0,
        "mean_llm_calls": sum(r.llm_calls for r in records) / n if n else 0.0,
        "mean_prompt_tokens": sum(r.prompt_tokens for r in records) / n if n else 0.0,
        "mean_completion_tokens": sum(r.completion_tokens for r in records) / n if n else 0.0,
        "failures": dict(sorted(failures.items())),
    }


def write_report(report: RunReport, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "results.jsonl", "w", encoding="utf-8") as fh:
        for r in report.records:
            fh.write(json.dumps(r.to_dict(), ensure_ascii=False) + "\n")
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(report.summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_benchmark(
    tasks: Sequence[Task],
    strategy: str,
    client_for: Callable[[Task], ChatClient],
    config: PipelineConfig | None = None,
    workers: int = 1,
    out_dir: str | Path | None = None,
) -> RunReport:
    """Run ``strategy`` over ``tasks`` with ``workers`` threads.

    ``client_for(task)`` supplies the client for a task (a shared live client,
    or a per-task replay fixture). Records come back sorted by task id. On
    interruption the records finished so far are still written.
    """
    if not tasks:
        raise EmptyTaskSet("no tasks to run")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    strategy = normalize_strategy(strategy)
    config = config or PipelineConfig()
    trace_dir = Path(out_dir) / "traces" if out_dir is not None else None

    def job(task: Task) -> RunRecord:
        try:
            client = client_for(task)
        except (RaluError, OSError) as exc:
            return RunRecord(task.id, strategy, False, "", 0, 0, 0, 0.0, failure=f"client:{type(exc).__name__}")
        return run_task(task, strategy, client, config, trace_dir)

    done: list[RunRecord] = []
    pool = ThreadPoolExecutor(max_workers=workers)
    try:
        futures = [pool.submit(job, t) for t in tasks]
        for fut in futures:
            done.append(fut.result())
    except KeyboardInterrupt:
        pool.shutdown(wait=False, cancel_futures=True)
        done = [f.result() for f in futures if f.done() and not f.cancelled()]
        _finish(done, tasks, strategy, out_dir)
        raise
    pool.shutdown()
    return _finish(done, tasks, strategy, out_dir)


def _finish(done, tasks, strategy, out_dir) -> RunReport:
    records = sorted(done, key=lambda r: task_sort_key(r.task_id))
    report = RunReport(records, summarize(records, tasks, strategy))
    if out_dir is not None:
        write_report(report, out_dir)
    return report
