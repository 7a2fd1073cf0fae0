"""Logic-unit alignment: judge each unit, repair it on WRONG, rewind, re-judge.

Units are processed strictly in order. The context for unit ``i`` is the
judge instructions, the task specification and the ``i - 1`` earlier units in
their final (possibly repaired) form, each paired with an ``OK`` reply. A
``WRONG`` verdict must carry a ``<Fix>`` block; the fix replaces the unit and
is judged again against the same prefix. After ``max_repair_rounds`` repairs
without an ``OK`` the most confident candidate wins, where confidence is the
mean clamped token probability of the judge reply (or, without logprobs, the
model's own ranking of the candidates).
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from typing import Sequence

from ralu.errors import RaluError
from ralu.llm import ChatClient, ChatMessage, ChatRequest, ChatResponse, LLMError
from ralu.templates import render, template
from ralu.units import LogicUnit, UnitSequence

logger = logging.getLogger(__name__)

OK, WRONG = "OK", "WRONG"
VERIFIED = "Verified"
MAX_CONFIDENCE_FALLBACK = "MaxConfidenceFallback"
UNVERIFIED_KEPT_ORIGINAL = "UnverifiedKeptOriginal"
LOGPROB, SELF_CONSISTENCY_RANK = "Logprob", "SelfConsistencyRank"

CONFIDENCE_SCALE = 100.0
CONFIDENCE_FLOOR = 0.005
_ABOVE_FLOOR = math.nextafter(CONFIDENCE_FLOOR, 1.0)


class AlignmentError(RaluError):
    pass


class MalformedVerdict(AlignmentError):
    pass


class EmptyLogprobs(AlignmentError):
    pass


class EmptyUnits(AlignmentError):
    pass


class AlignmentAborted(AlignmentError):
    """A client error stopped the session; ``path`` holds the units done so far."""

    def __init__(self, message: str, path: AlignmentPath):
        super().__init__(message)
        self.path = path


@dataclass(frozen=True)
class ChatSettings:
    model: str = "default"
    temperature: float = 0.7
    frequency_penalty: float = 0.3
    max_tokens: int = 2048

    def request(self, messages: Sequence[ChatMessage], want_logprobs: bool = False) -> ChatRequest:
        return ChatRequest(
            messages=tuple(messages),
            model=self.model,
            temperature=self.temperature,
            frequency_penalty=self.frequency_penalty,
            want_logprobs=want_logprobs,
            max_tokens=self.max_tokens,
        )


@dataclass
class AlignmentConfig:
    max_repair_rounds: int = 3
    confidence_threshold: float | None = None
    fallback: str = LOGPROB
    malformed_retry: int = 1
    chat: ChatSettings = field(default_factory=ChatSettings)

    def __post_init__(self):
        if self.max_repair_rounds < 0:
            raise ValueError("max_repair_rounds must be >= 0")
        if self.malformed_retry < 0:
            raise ValueError("malformed_retry must be >= 0")
        if self.fallback not in (LOGPROB, SELF_CONSISTENCY_RANK):
            raise ValueError(f"unknown fallback {self.fallback!r}")

    @property
    def unit_call_budget(self) -> int:
        return self.max_repair_rounds + 2


@dataclass(frozen=True)
class Verdict:
    judgment: str
    fix: str | None
    analysis: str

    def __post_init__(self):
        if self.judgment == WRONG and not self.fix:
            raise ValueError("a WRONG verdict needs a fix")
        if self.judgment == OK and self.fix is not None:
            raise ValueError("an OK verdict carries no fix")


@dataclass(frozen=True)
class UnitCandidate:
    text: str
    verdict: Verdict | None = None
    confidence: float | None = None
    repair_round: int = 0

    @property
    def origin(self) -> str:
        return "Original" if self.repair_round == 0 else f"Repair({self.repair_round})"


@dataclass
class ValidatedUnit:
    unit: LogicUnit
    final_text: str
    final_analysis: str
    status: str
    candidates: list[UnitCandidate]
    llm_calls: int
    turns: list[ChatMessage] = field(default_factory=list)
    flags: tuple[str, ...] = ()

    @property
    def repairs(self) -> int:
        return max((c.repair_round for c in self.candidates), default=0)

    @property
    def changed(self) -> bool:
        return self.final_text != self.unit.text


@dataclass
class AlignmentPath:
    spec: str
    units: list[ValidatedUnit]
    transcript: list[ChatMessage]
    degraded: tuple[str, ...] = ()

    @property
    def converged(self) -> bool:
        return bool(self.units) and all(u.status == VERIFIED for u in self.units)

    @property
    def llm_calls(self) -> int:
        return sum(u.llm_calls for u in self.units)

    def history(self) -> list[ChatMessage]:
        """Sanitized dialogue: final unit texts paired with their OK analyses."""
        return unit_history(self.units)


def unit_prompt(index: int, text: str, is_first: bool) -> str:
    return ("## Process\n" if is_first else "") + f"Unit {index + 1}: {text}"


def ok_reply(analysis: str) -> str:
    return f"OK\nAnalysis: {analysis}"


def unit_history(validated: Sequence[ValidatedUnit]) -> list[ChatMessage]:
    messages = []
    for k, vu in enumerate(validated):
        messages.append(ChatMessage("user", unit_prompt(k, vu.final_text, k == 0)))
        messages.append(ChatMessage("assistant", ok_reply(vu.final_analysis)))
    return messages


def spec_message(spec: str) -> ChatMessage:
    return ChatMessage("user", f"Specification: {spec}")


def assemble_context(
    spec: str,
    validated: Sequence[ValidatedUnit],
    current_unit: LogicUnit | str,
    is_first: bool,
) -> list[ChatMessage]:
    """Messages for judging ``current_unit`` after the already validated units."""
    text = current_unit if isinstance(current_unit, str) else current_unit.text
    return [
        ChatMessage("system", template("judge_system")),
        spec_message(spec),
        *unit_history(validated),
        ChatMessage("user", unit_prompt(len(validated), text, is_first)),
    ]


_LEAD_RE = re.compile(r"^[\s*_#>`]*(OK|WRONG)\b", re.IGNORECASE)
_FIX_RE = re.compile(r"<Fix>(.*?)</Fix>", re.DOTALL)
_ANALYSIS_MARK = "Analysis:"


def parse_verdict(response: str) -> Verdict:
    """Split a judge reply into judgment, fix and analysis."""
    m = _LEAD_RE.match(response)
    if not m:
        raise MalformedVerdict(f"reply does not start with OK or WRONG: {response[:60]!r}")
    judgment = m.group(1).upper()
    pos = response.find(_ANALYSIS_MARK)
    analysis = response[pos + len(_ANALYSIS_MARK) :].strip() if pos >= 0 else ""
    if judgment == OK:
        return Verdict(OK, None, analysis)
    fm = _FIX_RE.search(response)
    fix = "\n".join(line.rstrip() for line in fm.group(1).strip().splitlines()) if fm else ""
    if not fix:
        raise MalformedVerdict("WRONG verdict without a <Fix> block")
    return Verdict(WRONG, fix, analysis)


def clamp_probability(lp: float) -> float:
    """Per-token probability clamped to ``(0.005, 1]``, unscaled."""
    # for very negative lp the sum rounds to the floor itself; keep the bound open
    return min(max(math.exp(lp) + CONFIDENCE_FLOOR, _ABOVE_FLOOR), 1.0)


def confidence_score(token_logprobs: Sequence[float], scale: float = CONFIDENCE_SCALE) -> float:
    """Mean clamped token probability of a reply, times ``scale``."""
    if not token_logprobs:
        raise EmptyLogprobs("confidence needs at least one token logprob")
    return sum(clamp_probability(lp) * scale for lp in token_logprobs) / len(token_logprobs)


def response_confidence(response: ChatResponse) -> float | None:
    if not response.token_logprobs:
        return None
    return confidence_score(response.token_logprobs)


_INT_RE = re.compile(r"\d+")


def rank_candidates(
    candidates: Sequence[UnitCandidate],
    mode: str = LOGPROB,
    llm: ChatClient | None = None,
    spec: str = "",
    settings: ChatSettings | None = None,
    warnings: list[str] | None = None,
    turns: list[ChatMessage] | None = None,
) -> int:
    """Index of the preferred candidate.

    ``Logprob`` takes the highest confidence, earliest on ties.
    ``SelfConsistencyRank`` asks ``llm`` to pick a number; an unusable reply
    selects index 0 and appends a note to ``warnings``.
    """
    if not candidates:
        raise ValueError("rank_candidates needs at least one candidate")
    if len(candidates) == 1:
        return 0
    if mode == LOGPROB:
        best, best_conf = 0, -math.inf
        for i, c in enumerate(candidates):
            conf = -math.inf if c.confidence is None else c.confidence
            if conf > best_conf:
                best, best_conf = i, conf
        return best
    if llm is None:
        raise ValueError("self-consistency ranking needs a client")
    listing = "\n\n".join(f"Candidate {i + 1}:\n{c.text}" for i, c in enumerate(candidates))
    prompt = ChatMessage("user", render("rank_candidates", spec=spec, candidates=listing))
    reply = llm.complete((settings or ChatSettings()).request([prompt]))
    if turns is not None:
        turns.extend([prompt, ChatMessage("assistant", reply.text or " ")])
    m = _INT_RE.search(reply.text)
    choice = int(m.group()) - 1 if m else -1
    if not 0 <= choice < len(candidates):
        note = f"unusable ranking reply {reply.text[:40]!r}; kept candidate 1"
        logger.warning(note)
        if warnings is not None:
            warnings.append(note)
        return 0
    return choice


def align_unit(
    spec: str,
    validated: Sequence[ValidatedUnit],
    unit: LogicUnit,
    llm: ChatClient,
    config: AlignmentConfig | None = None,
) -> ValidatedUnit:
    """Run the judge/fix/rewind loop for one unit.

    At most ``max_repair_rounds + 1`` judge calls are made (format-reminder
    retries count against that) plus at most one ranking call.
    """
    config = config or AlignmentConfig()
    is_first = not validated
    want_logprobs = config.fallback == LOGPROB
    judge_budget = config.max_repair_rounds + 1
    malformed_left = config.malformed_retry
    candidates: list[UnitCandidate] = []
    turns: list[ChatMessage] = []
    flags: list[str] = []
    calls = 0
    text = unit.text
    repair_round = 0

    def judge(messages):
        nonlocal calls
        calls += 1
        reply = llm.complete(config.chat.request(messages, want_logprobs))
        turns.extend([messages[-1], ChatMessage("assistant", reply.text or " ")])
        return reply

    while calls < judge_budget:
        context = assemble_context(spec, validated, text, is_first)
        reply = judge(context)
        try:
            verdict = parse_verdict(reply.text)
        except MalformedVerdict:
            verdict = None
            retry = context + [ChatMessage("assistant", reply.text or " ")]
            while verdict is None and malformed_left > 0 and calls < judge_budget:
                malformed_left -= 1
                retry = retry + [ChatMessage("user", template("format_reminder"))]
                reply = judge(retry)
                retry = retry + [ChatMessage("assistant", reply.text or " ")]
                try:
                    verdict = parse_verdict(reply.text)
                except MalformedVerdict:
                    pass
            if verdict is None:
                return ValidatedUnit(
                    unit=unit,
                    final_text=unit.text,
                    final_analysis="",
                    status=UNVERIFIED_KEPT_ORIGINAL,
                    candidates=candidates,
                    llm_calls=calls,
                    turns=turns,
                    flags=("malformed_verdict",),
                )
        confidence = response_confidence(reply)
        candidates.append(UnitCandidate(text, verdict, confidence, repair_round))
        if verdict.judgment == OK:
            return ValidatedUnit(
                unit=unit,
                final_text=text,
                final_analysis=verdict.analysis,
                status=VERIFIED,
                candidates=candidates,
                llm_calls=calls,
                turns=turns,
            )
        if (
            config.confidence_threshold is not None
            and confidence is not None
            and confidence >= config.confidence_threshold
        ):
            flags.append("confidence_threshold")
            break
        if repair_round == config.max_repair_rounds:
            break
        repair_round += 1
        text = verdict.fix

    mode = config.fallback
    if mode == LOGPROB and any(c.confidence is None for c in candidates):
        mode = SELF_CONSISTENCY_RANK
        flags.append("no_logprobs")
    before = calls
    warnings: list[str] = []
    rank_turns: list[ChatMessage] = []
    counting = _CountingClient(llm)
    best = rank_candidates(
        candidates, mode, counting, spec, config.chat, warnings=warnings, turns=rank_turns
    )
    calls = before + counting.calls
    turns.extend(rank_turns)
    if warnings:
        flags.append("rank_parse_failed")
    chosen = candidates[best]
    return ValidatedUnit(
        unit=unit,
        final_text=chosen.text,
        final_analysis=chosen.verdict.analysis if chosen.verdict else "",
        status=MAX_CONFIDENCE_FALLBACK,
        candidates=candidates,
        llm_calls=calls,
        turns=turns,
        flags=tuple(flags),
    )


class _CountingClient:
    def __init__(self, inner: ChatClient):
        self.inner = inner
        self.calls = 0

    def complete(self, request: ChatRequest) -> ChatResponse:
        self.calls += 1
        return self.inner.complete(request)


def align_path(
    spec: str,
    units: UnitSequence | Sequence[LogicUnit],
    llm: ChatClient,
    config: AlignmentConfig | None = None,
) -> AlignmentPath:
    """Align every unit in order; refined texts feed the later contexts."""
    config = config or AlignmentConfig()
    unit_list = list(units)
    if not unit_list:
        raise EmptyUnits("alignment needs at least one logic unit")
    validated: list[ValidatedUnit] = []
    transcript = [ChatMessage("system", template("judge_system")), spec_message(spec)]
    for unit in unit_list:
        try:
            vu = align_unit(spec, validated, unit, llm, config)
        except LLMError as exc:
            partial = AlignmentPath(spec, validated, transcript, _path_flags(validated, partial=True))
            raise AlignmentAborted(f"alignment stopped at unit {unit.index + 1}: {exc}", partial) from exc
        validated.append(vu)
        transcript.extend(vu.turns)
    return AlignmentPath(spec, validated, transcript, _path_flags(validated))


def _path_flags(validated: Sequence[ValidatedUnit], partial: bool = False) -> tuple[str, ...]:
    flags: list[str] = []
    for vu in validated:
        for f in vu.flags:
            if f not in flags:
                flags.append(f)
    if partial:
        flags.append("partial")
    elif validated and not all(v.status == VERIFIED for v in validated):
        flags.append("not_converged")
    return tuple(flags)
