"""Benchmark loading, strategies, sandboxed scoring and reporting."""

from ralu.harness.bench import EmptyTaskSet, RunRecord, RunReport, run_benchmark, run_task, summarize
from ralu.harness.datasets import (
    MissingEntryPoint,
    NoBoxedAnswer,
    ParseError,
    Task,
    load_dataset,
    load_gsm8k,
    load_humaneval,
    load_math,
    load_mbpp,
)
from ralu.harness.evaluate import CodeEvaluation, evaluate_code, evaluate_math
from ralu.harness.strategies import STRATEGIES, Outcome, PipelineConfig, solve_task

__all__ = [
    "CodeEvaluation",
    "EmptyTaskSet",
    "MissingEntryPoint",
    "NoBoxedAnswer",
    "Outcome",
    "ParseError",
    "PipelineConfig",
    "RunRecord",
    "RunReport",
    "STRATEGIES",
    "Task",
    "evaluate_code",
    "evaluate_math",
    "load_dataset",
    "load_gsm8k",
    "load_humaneval",
    "load_math",
    "load_mbpp",
    "run_benchmark",
    "run_task",
    "solve_task",
    "summarize",
]
