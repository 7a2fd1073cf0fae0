"""Benchmark loaders for GSM8K, MATH, HumanEval and MBPP (plus their extended variants)."""

from __future__ import annotations

import ast
import builtins
import json
import re
from dataclasses import dataclass
from pathlib import Path

from ralu.errors import RaluError
from ralu.synthesis import CODEGEN, MATHQA, normalize_answer


class DatasetError(RaluError):
    pass


class ParseError(DatasetError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


class MissingEntryPoint(DatasetError):
    pass


class NoBoxedAnswer(DatasetError):
    pass


@dataclass(frozen=True)
class Task:
    id: str
    kind: str
    spec: str
    entry_point: str | None = None
    tests: str | None = None
    gold_answer: str | None = None

    def __post_init__(self):
        if self.kind == CODEGEN and not (self.entry_point and self.tests):
            raise ValueError(f"code task {self.id} needs an entry point and tests")
        if self.kind == MATHQA and self.gold_answer is None:
            raise ValueError(f"math task {self.id} needs a gold answer")
        if self.kind not in (CODEGEN, MATHQA):
            raise ValueError(f"unknown task kind {self.kind!r}")


def _read_jsonl(path: str | Path) -> list[tuple[int, dict]]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", lineno) from None
            if not isinstance(obj, dict):
                raise ParseError("record is not an object", lineno)
            records.append((lineno, obj))
    return records


def _field(obj: dict, name: str, lineno: int) -> str:
    value = obj.get(name)
    if not isinstance(value, str):
        raise ParseError(f"missing text field {name!r}", lineno)
    return value


def gsm8k_gold(answer: str) -> str:
    marker = answer.rfind("#### ")
    if marker < 0:
        raise ValueError("no '#### ' marker")
    return normalize_answer(answer[marker + len("#### ") :])


def load_gsm8k(path: str | Path) -> list[Task]:
    tasks = []
    for i, (lineno, obj) in enumerate(_read_jsonl(path)):
        question = _field(obj, "question", lineno)
        try:
            gold = gsm8k_gold(_field(obj, "answer", lineno))
        except ValueError:
            raise ParseError("answer has no final '#### ' marker", lineno) from None
        task_id = str(obj.get("id", obj.get("task_id", f"gsm8k/{i}")))
        tasks.append(Task(task_id, MATHQA, question, gold_answer=gold))
    return tasks


def load_humaneval(path: str | Path) -> list[Task]:
    tasks = []
    for lineno, obj in _read_jsonl(path):
        entry = _field(obj, "entry_point", lineno)
        tests = _field(obj, "test", lineno) + f"\n\ncheck({entry})\n"
        if obj.get("task_id") is None:
            raise ParseError("missing field 'task_id'", lineno)
        tasks.append(
            Task(
                id=str(obj["task_id"]),
                kind=CODEGEN,
                spec=_field(obj, "prompt", lineno),
                entry_point=entry,
                tests=tests,
            )
        )
    return tasks


_BUILTIN_NAMES = frozenset(dir(builtins))


def assert_entry_point(assertion: str) -> str:
    """Name of the first non-builtin function called in an ``assert`` statement."""
    try:
        tree = ast.parse(assertion.strip())
    except SyntaxError:
        raise MissingEntryPoint(f"cannot parse test {assertion[:60]!r}") from None
    for stmt in tree.body:
        if not isinstance(stmt, ast.Assert):
            continue
        for node in ast.walk(stmt.test):
            if (
                isinstance(node, ast.Call)
                and isinstance(node.func, ast.Name)
                and node.func.id not in _BUILTIN_NAMES
            ):
                return node.func.id
    raise MissingEntryPoint(f"no function call in {assertion[:60]!r}")


def render_mbpp_spec(text: str, entry_point: str, first_assert: str) -> str:
    head = text.strip().rstrip(".")
    return f"{head}, the entry point is ``{entry_point}''.\n{first_assert.strip()}"


def load_mbpp(path: str | Path) -> list[Task]:
    tasks = []
    for lineno, obj in _read_jsonl(path):
        text = obj.get("text", obj.get("prompt"))
        if not isinstance(text, str):
            raise ParseError("missing text field 'text'", lineno)
        test_list = obj.get("test_list")
        if not isinstance(test_list, list):
            raise ParseError("missing list field 'test_list'", lineno)
        asserts = [t for t in test_list if isinstance(t, str) and t.strip().startswith("assert")]
        if not asserts:
            raise MissingEntryPoint(f"line {lineno}: test_list has no assert")
        entry = assert_entry_point(asserts[0])
        setup = [*obj.get("test_imports", []), obj.get("test_setup_code", "")]
        if isinstance(obj.get("test"), str) and obj["test"].strip():
            body = obj["test"]
        else:
            body = "\n".join(test_list)
        tests = "\n".join(s for s in setup if s) + ("\n" if any(setup) else "") + body + "\n"
        tasks.append(
            Task(
                id=str(obj.get("task_id", lineno)),
                kind=CODEGEN,
                spec=render_mbpp_spec(text, entry, asserts[0]),
                entry_point=entry,
                tests=tests,
            )
        )
    return tasks


_LATEX_SPACING = re.compile(r"\\[!,;:]")


def normalize_latex(text: str) -> str:
    s = _LATEX_SPACING.sub("", text)
    s = re.sub(r"\s+", "", s)
    while s.startswith("{") and s.endswith("}") and _balanced(s[1:-1]):
        s = s[1:-1]
    return s


def _balanced(s: str) -> bool:
    depth = 0
    for ch in s:
        depth += {"{": 1, "}": -1}.get(ch, 0)
        if depth < 0:
            return False
    return depth == 0


def last_boxed(solution: str) -> str:
    """Content of the last ``\\boxed{...}`` group, braces matched."""
    start = solution.rfind("\\boxed")
    if start < 0:
        raise NoBoxedAnswer("no \\boxed{...} in the solution")
    i = solution.find("{", start)
    if i < 0:
        raise NoBoxedAnswer("\\boxed without a brace group")
    depth = 0
    for j in range(i, len(solution)):
        if solution[j] == "{":
            depth += 1
        elif solution[j] == "}":
            depth -= 1
            if depth == 0:
                return solution[i + 1 : j]
    raise NoBoxedAnswer("unbalanced \\boxed group")


def load_math(path: str | Path) -> list[Task]:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg})", exc.lineno) from None
    if not isinstance(data, list):
        raise ParseError("MATH file must hold a JSON array")
    tasks = []
    for i, obj in enumerate(data):
        if not isinstance(obj, dict) or not isinstance(obj.get("problem"), str) or not isinstance(
            obj.get("solution"), str
        ):
            raise ParseError(f"record {i} needs 'problem' and 'solution' text")
        gold = normalize_latex(last_boxed(obj["solution"]))
        task_id = str(obj.get("id", obj.get("unique_id", f"math/{i}")))
        tasks.append(Task(task_id, MATHQA, obj["problem"], gold_answer=gold))
    return tasks


LOADERS = {
    "gsm8k": load_gsm8k,
    "math": load_math,
    "humaneval": load_humaneval,
    "mbpp": load_mbpp,
}


def load_dataset(path: str | Path, kind: str) -> list[Task]:
    try:
        loader = LOADERS[kind]
    except KeyError:
        raise DatasetError(f"unknown dataset kind {kind!r}") from None
    return loader(path)
