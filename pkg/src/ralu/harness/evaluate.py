"""Scoring: sandboxed test execution for code, normalized comparison for math."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction

from ralu.harness.datasets import Task, normalize_latex
from ralu.sandbox import SandboxPolicy, run_script
from ralu.synthesis import CODEGEN, normalize_answer

STDERR_EXCERPT_CHARS = 500
REL_TOL = 1e-9


@dataclass
class CodeEvaluation:
    passed: bool
    stderr_excerpt: str
    duration_s: float
    reason: str | None = None


def evaluate_code(program: str, task: Task, policy: SandboxPolicy | None = None) -> CodeEvaluation:
    """Run ``program`` followed by the task's tests; passing means exit status 0 in time."""
    if task.kind != CODEGEN:
        raise ValueError(f"task {task.id} is not a code task")
    result = run_script(f"{program}\n\n{task.tests}", policy)
    excerpt = result.stderr[-STDERR_EXCERPT_CHARS:]
    if result.timed_out:
        return CodeEvaluation(False, excerpt, result.duration_s, "timeout")
    if result.exit_code != 0:
        return CodeEvaluation(False, excerpt, result.duration_s, "test_failed")
    return CodeEvaluation(True, excerpt, result.duration_s)


def canonical_answer(text: str) -> str:
    return normalize_latex(normalize_answer(text))


_FRACTION_RE = re.compile(r"^([-+]?\d+)/(\d+)$")


def _as_number(text: str) -> float | None:
    m = _FRACTION_RE.match(text)
    if m and int(m.group(2)) != 0:
        return float(Fraction(int(m.group(1)), int(m.group(2))))
    try:
        value = float(text)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def evaluate_math(answer: str, gold: str) -> bool:
    a, g = canonical_answer(answer), canonical_answer(gold)
    if a == g:
        return True
    x, y = _as_number(a), _as_number(g)
    if x is None or y is None:
        return False
    return math.isclose(x, y, rel_tol=REL_TOL, abs_tol=0.0)
