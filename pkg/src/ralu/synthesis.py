"""Final solution synthesis from an aligned reasoning path."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

from ralu.alignment import AlignmentPath, ChatSettings
from ralu.errors import RaluError
from ralu.llm import ChatClient, ChatMessage
from ralu.sandbox import ExecResult, SandboxPolicy, run_script
from ralu.templates import render

CODEGEN, MATHQA = "CodeGen", "MathQA"


class ExtractionError(RaluError):
    pass


class NoCodeBlock(ExtractionError):
    pass


class NoAnswerTag(ExtractionError):
    pass


@dataclass
class FinalSolution:
    raw_text: str
    task_kind: str
    program: str | None = None
    answer: str | None = None
    llm_calls: int = 1
    flags: tuple[str, ...] = ()
    messages: tuple[ChatMessage, ...] = ()


_CODE_RE = re.compile(r"<code>(.*?)</code>", re.DOTALL)
_FENCE_RE = re.compile(r"```[ \t]*[\w+-]*[ \t]*\n(.*?)```", re.DOTALL)
_ANSWER_RE = re.compile(r"<Answer>(.*?)</Answer>", re.DOTALL)
_THOUSANDS_RE = re.compile(r"^[-+]?\d{1,3}(,\d{3})+(\.\d+)?$")
_TRAILING_ZERO_RE = re.compile(r"^([-+]?\d+)\.0+$")


def extract_code_block(text: str) -> str:
    """Program text inside the first ``<code>...</code>`` (or fenced) block."""
    m = _CODE_RE.search(text)
    if m is None:
        m = _FENCE_RE.search(text)
    if m is None:
        raise NoCodeBlock("no <code> block or fenced code block in the reply")
    body = m.group(1)
    if body.startswith("\n"):
        body = body[1:]
    if body.endswith("\n"):
        body = body[:-1]
    return body


def normalize_answer(text: str) -> str:
    """Strip whitespace, ``$`` delimiters, thousands separators and a trailing ``.0``."""
    s = text.strip()
    while len(s) >= 2 and s.startswith("$") and s.endswith("$"):
        s = s[1:-1].strip()
    s = s.strip("$").strip()
    if _THOUSANDS_RE.match(s):
        s = s.replace(",", "")
    m = _TRAILING_ZERO_RE.match(s)
    if m:
        s = m.group(1)
    return s


def extract_math_answer(text: str) -> str:
    m = _ANSWER_RE.search(text)
    if m is None:
        raise NoAnswerTag("no <Answer>...</Answer> in the reply")
    return normalize_answer(m.group(1))


def printed_answer(result: ExecResult) -> str | None:
    """Last non-empty stdout line of a successful run, normalized."""
    if not result.ok:
        return None
    lines = [ln for ln in result.stdout.splitlines() if ln.strip()]
    return normalize_answer(lines[-1]) if lines else None


def synthesis_prompt(spec: str, task_kind: str, entry_point: str | None = None) -> str:
    if task_kind == CODEGEN:
        return render("synthesize_code", spec=spec, entry_point=entry_point or "the required function")
    return render("synthesize_math", spec=spec)


def synthesis_messages(
    spec: str, path: AlignmentPath, task_kind: str, entry_point: str | None = None
) -> list[ChatMessage]:
    """Sanitized path history plus the final request; the initial program is never included."""
    return path.history() + [ChatMessage("user", synthesis_prompt(spec, task_kind, entry_point))]


def synthesize(
    spec: str,
    path: AlignmentPath,
    llm: ChatClient,
    task_kind: str = CODEGEN,
    entry_point: str | None = None,
    settings: ChatSettings | None = None,
    sandbox: SandboxPolicy | None = None,
    runner: Callable[[str, SandboxPolicy | None], ExecResult] = run_script,
) -> FinalSolution:
    """Ask for the final solution given the aligned path.

    For math questions the synthesized program is executed and its last
    printed line is the answer; if that fails, one follow-up turn asks for
    ``<Answer></Answer>`` directly.
    """
    if not path.units:
        raise ValueError("cannot synthesize from an empty path")
    settings = settings or ChatSettings()
    messages = synthesis_messages(spec, path, task_kind, entry_point)
    reply = llm.complete(settings.request(messages))
    if task_kind == CODEGEN:
        return FinalSolution(
            raw_text=reply.text,
            task_kind=CODEGEN,
            program=extract_code_block(reply.text),
            messages=tuple(messages),
        )
    return _math_solution(reply.text, messages, llm, settings, sandbox, runner)


def _math_solution(text, messages, llm, settings, sandbox, runner) -> FinalSolution:
    program = None
    error = "no program"
    try:
        program = extract_code_block(text)
    except NoCodeBlock:
        try:
            return FinalSolution(text, MATHQA, answer=extract_math_answer(text), messages=tuple(messages))
        except NoAnswerTag:
            pass
    if program is not None:
        result = runner(program, sandbox)
        answer = printed_answer(result)
        if answer:
            return FinalSolution(text, MATHQA, program=program, answer=answer, messages=tuple(messages))
        error = "timeout" if result.timed_out else (result.stderr.strip().splitlines() or ["no output"])[-1]
    followup = messages + [
        ChatMessage("assistant", text or " "),
        ChatMessage("user", render("math_answer_followup", error=error[:200])),
    ]
    reply = llm.complete(settings.request(followup))
    return FinalSolution(
        raw_text=reply.text,
        task_kind=MATHQA,
        program=program,
        answer=extract_math_answer(reply.text),
        llm_calls=2,
        flags=("math_answer_followup",),
        messages=tuple(followup),
    )
