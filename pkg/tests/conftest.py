import json
import math
import os
from pathlib import Path

import pytest

from ralu.llm import FixtureEntry, ReplayBackend

HERE = Path(__file__).parent
FIXTURES = HERE / "fixtures"
PROGRAMS = FIXTURES / "programs"
DATA = HERE.parent / "src" / "ralu" / "data"


def read_program(name: str) -> str:
    return (PROGRAMS / name).read_text(encoding="utf-8")


def logprobs_for(confidence: float, n: int = 4) -> list[float]:
    """``n`` equal token logprobs whose confidence score is ``confidence``."""
    if confidence >= 100.0:
        return [0.0] * n
    return [math.log(confidence / 100.0 - 0.005)] * n


def wrong(fix: str, analysis: str = "needs a fix") -> str:
    return f"WRONG\n<Fix>\n{fix}\n</Fix>\nAnalysis: {analysis}"


def ok(analysis: str = "fine") -> str:
    return f"OK\nAnalysis: {analysis}"


def entry(response: str, confidence: float | None = None, expect: str | None = None) -> FixtureEntry:
    lps = tuple(logprobs_for(confidence)) if confidence is not None else None
    return FixtureEntry(response, expect, lps)


@pytest.fixture
def replay():
    def make(*entries):
        return ReplayBackend(list(entries))

    return make


@pytest.fixture
def eulerian_buggy():
    return read_program("eulerian_num_buggy.py")


def pytest_collection_modifyitems(config, items):
    if os.environ.get("RALU_LIVE_URL"):
        return
    skip = pytest.mark.skip(reason="set RALU_LIVE_URL to run live backend checks")
    for item in items:
        if "live" in item.keywords:
            item.add_marker(skip)


def load_jsonl(path):
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]


# criterion lines from test_acceptance, repeated at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
