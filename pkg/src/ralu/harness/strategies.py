"""Per-task solving strategies: the three-stage pipeline and its ablations/baselines.

``ralu``          generate a program, cut it into CFG units, align, synthesize
``ralu_line``     same, one unit per program line
``ralu_nlsteps``  units are the ``<Step>`` segments of a CoT reply
``direct``        one prompt, one answer
``cot``           one step-by-step prompt, one answer
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ralu.alignment import AlignmentConfig, AlignmentPath, align_path
from ralu.llm import ChatClient, ChatMessage
from ralu.sandbox import SandboxPolicy
from ralu.synthesis import (
    CODEGEN,
    FinalSolution,
    extract_code_block,
    extract_math_answer,
    synthesize,
)
from ralu.templates import render
from ralu.units import CFG, LINE_BY_LINE, DEFAULT_QUOTES, Delimiters, UnitSequence, extract_units, extract_units_nl_steps

STRATEGIES = ("ralu", "ralu_line", "ralu_nlsteps", "direct", "cot")


def normalize_strategy(name: str) -> str:
    key = name.replace("-", "_").lower()
    if key not in STRATEGIES:
        raise ValueError(f"unknown strategy {name!r}; choose from {', '.join(STRATEGIES)}")
    return key


@dataclass
class PipelineConfig:
    alignment: AlignmentConfig = field(default_factory=AlignmentConfig)
    sandbox: SandboxPolicy = field(default_factory=SandboxPolicy)
    quotes: Delimiters = DEFAULT_QUOTES


@dataclass
class Outcome:
    """What a strategy produced for one task."""

    final_output: str
    raw_text: str
    initial_program: str | None = None
    units: UnitSequence | None = None
    path: AlignmentPath | None = None
    solution: FinalSolution | None = None
    degraded: list[str] = field(default_factory=list)

    @property
    def program(self) -> str | None:
        return self.solution.program if self.solution else None


def _ask(llm: ChatClient, config: PipelineConfig, prompt: str) -> str:
    request = config.alignment.chat.request([ChatMessage("user", prompt)])
    return llm.complete(request).text


def generation_prompt(task) -> str:
    name = "generate_code" if task.kind == CODEGEN else "generate_math"
    return render(name, spec=task.spec)


def _single_answer(task, text: str) -> Outcome:
    if task.kind == CODEGEN:
        program = extract_code_block(text)
        return Outcome(program, text, solution=FinalSolution(text, CODEGEN, program=program))
    answer = extract_math_answer(text)
    return Outcome(answer, text, solution=FinalSolution(text, task.kind, answer=answer))


def solve_task(task, strategy: str, llm: ChatClient, config: PipelineConfig | None = None) -> Outcome:
    """Run ``strategy`` on ``task``; extraction and client errors propagate."""
    config = config or PipelineConfig()
    strategy = normalize_strategy(strategy)

    if strategy == "direct":
        prompt = generation_prompt(task) if task.kind == CODEGEN else render("direct_math", spec=task.spec)
        return _single_answer(task, _ask(llm, config, prompt))
    if strategy == "cot":
        name = "cot_code" if task.kind == CODEGEN else "cot_math"
        return _single_answer(task, _ask(llm, config, render(name, spec=task.spec)))

    degraded: list[str] = []
    initial = None
    if strategy == "ralu_nlsteps":
        name = "cot_steps_code" if task.kind == CODEGEN else "cot_math"
        units = extract_units_nl_steps(_ask(llm, config, render(name, spec=task.spec)))
    else:
        initial = extract_code_block(_ask(llm, config, generation_prompt(task)))
        units = extract_units(
            initial,
            CFG if strategy == "ralu" else LINE_BY_LINE,
            entry_point=task.entry_point,
            quotes=config.quotes,
        )
        degraded.extend(units.degraded)
    path = align_path(task.spec, units, llm, config.alignment)
    degraded.extend(path.degraded)
    solution = synthesize(
        task.spec,
        path,
        llm,
        task.kind,
        entry_point=task.entry_point,
        settings=config.alignment.chat,
        sandbox=config.sandbox,
    )
    degraded.extend(solution.flags)
    final = solution.program if task.kind == CODEGEN else solution.answer
    return Outcome(
        final_output=final or "",
        raw_text=solution.raw_text,
        initial_program=initial,
        units=units,
        path=path,
        solution=solution,
        degraded=degraded,
    )
