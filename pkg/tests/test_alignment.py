import math

import pytest

from conftest import DATA, entry, ok, read_program, wrong
from ralu.alignment import (
    LOGPROB,
    MAX_CONFIDENCE_FALLBACK,
    OK,
    SELF_CONSISTENCY_RANK,
    UNVERIFIED_KEPT_ORIGINAL,
    VERIFIED,
    WRONG,
    AlignmentAborted,
    AlignmentConfig,
    EmptyLogprobs,
    EmptyUnits,
    MalformedVerdict,
    UnitCandidate,
    Verdict,
    align_path,
    align_unit,
    assemble_context,
    confidence_score,
    parse_verdict,
    rank_candidates,
)
from ralu.llm import FixtureEntry, ReplayBackend, SessionClient, load_fixture
from ralu.units import LogicUnit, extract_units


def unit(i, text):
    return LogicUnit(index=i, text=text, label="", kind="cfg")


def candidates(confs):
    return [UnitCandidate(f"c{i}", Verdict(WRONG, "fix", ""), c, i) for i, c in enumerate(confs)]


# verdict parsing


def test_parse_ok():
    v = parse_verdict("OK\nAnalysis: This step correctly handles the edge case.")
    assert (v.judgment, v.fix, v.analysis) == (OK, None, "This step correctly handles the edge case.")


def test_parse_wrong_with_fix():
    reply = "WRONG  \n<Fix>\n#BRANCH# If Condition `if m == 0' is satisfied, then RUN `return 1' \n</Fix> \nAnalysis: checks m"
    v = parse_verdict(reply)
    assert v.judgment == WRONG
    assert v.fix == "#BRANCH# If Condition `if m == 0' is satisfied, then RUN `return 1'"
    assert v.analysis == "checks m"


@pytest.mark.parametrize("reply", ["ok\nAnalysis: a", "**OK**\nAnalysis: a", "  OK.\nAnalysis: a"])
def test_parse_is_lenient_about_leading_decoration(reply):
    assert parse_verdict(reply).judgment == OK


@pytest.mark.parametrize("reply", ["Maybe fine", "OKAY then", "WRONG\nAnalysis: no fix given", ""])
def test_parse_malformed(reply):
    with pytest.raises(MalformedVerdict):
        parse_verdict(reply)


# confidence


def test_confidence_examples():
    assert confidence_score([0.0, 0.0]) == 100.0
    assert confidence_score([math.log(0.5)]) == pytest.approx(50.5, abs=1e-12)
    assert confidence_score([0.0, math.log(0.5)]) == pytest.approx(75.25, abs=1e-12)
    with pytest.raises(EmptyLogprobs):
        confidence_score([])


def test_rank_examples():
    assert rank_candidates(candidates([96.50, 98.96])) == 1
    assert rank_candidates(candidates([42.0])) == 0
    assert rank_candidates(candidates([90.0, 90.0])) == 0


def test_self_consistency_rank_parses_number():
    llm = ReplayBackend([FixtureEntry("The best is candidate 2.")])
    assert rank_candidates(candidates([None, None, None]), SELF_CONSISTENCY_RANK, llm, spec="s") == 1


def test_self_consistency_rank_unusable_reply():
    llm = ReplayBackend([FixtureEntry("none of them")])
    warnings = []
    assert rank_candidates(candidates([None, None]), SELF_CONSISTENCY_RANK, llm, warnings=warnings) == 0
    assert warnings


# context


def test_first_unit_context(eulerian_buggy):
    units = extract_units(eulerian_buggy)
    msgs = assemble_context("SPEC", [], units[0], True)
    assert msgs[0].role == "system" and "<Fix>" in msgs[0].content
    assert msgs[1].content == "Specification: SPEC"
    assert msgs[-1].content.startswith("## Process\nUnit 1: #ENTER FUNCTION# eulerian_num")


def test_context_carries_refined_texts():
    llm = ReplayBackend([entry(ok("a1"), 99), entry(wrong("FIXED TWO"), 99), entry(ok("a2"), 99)])
    v1 = align_unit("S", [], unit(0, "ONE"), llm)
    v2 = align_unit("S", [v1], unit(1, "TWO"), llm)
    msgs = assemble_context("S", [v1, v2], unit(2, "THREE"), False)
    pairs = [m for m in msgs[2:-1]]
    assert len(pairs) == 4
    assert pairs[0].content == "## Process\nUnit 1: ONE"
    assert pairs[2].content == "Unit 2: FIXED TWO"
    assert pairs[3].content == "OK\nAnalysis: a2"
    assert msgs[-1].content == "Unit 3: THREE"


# the repair loop


def test_ok_first_is_byte_identical():
    llm = ReplayBackend([entry(ok(), 97)])
    vu = align_unit("S", [], unit(0, "RUN `x = 1'  "), llm)
    assert vu.status == VERIFIED and vu.llm_calls == 1
    assert vu.final_text == "RUN `x = 1'  "


def test_wrong_then_ok_is_verified_after_two_calls():
    llm = ReplayBackend([entry(wrong("RUN `x = 2'"), 98.96), entry(ok(), 97.61)])
    vu = align_unit("S", [], unit(0, "RUN `x = 1'"), llm)
    assert vu.status == VERIFIED and vu.llm_calls == 2 and vu.repairs == 1
    assert vu.final_text == "RUN `x = 2'"


def test_rewind_reuses_identical_prefix():
    session = SessionClient(ReplayBackend([entry(ok(), 99), entry(wrong("B2"), 99), entry(wrong("B3"), 99), entry(ok(), 99)]))
    v1 = align_unit("S", [], unit(0, "A"), session)
    align_unit("S", [v1], unit(1, "B"), session)
    judged = [ex.request.messages for ex in session.exchanges[1:]]
    prefixes = {tuple(m[:-1]) for m in judged}
    assert len(prefixes) == 1
    assert [m[-1].content for m in judged] == ["Unit 2: B", "Unit 2: B2", "Unit 2: B3"]


def test_all_wrong_falls_back_to_max_confidence():
    confs = [90, 95, 93, 91]
    llm = ReplayBackend([entry(wrong(f"R{i + 1}"), c) for i, c in enumerate(confs)])
    vu = align_unit("S", [], unit(0, "R0"), llm, AlignmentConfig(max_repair_rounds=3))
    assert vu.status == MAX_CONFIDENCE_FALLBACK
    assert vu.llm_calls == 4
    assert [round(c.confidence, 6) for c in vu.candidates] == confs
    assert vu.final_text == "R1"
    assert vu.candidates[1].origin == "Repair(1)"


def test_fallback_without_logprobs_uses_ranking_call():
    llm = ReplayBackend([FixtureEntry(wrong("R1")), FixtureEntry(wrong("R2")), FixtureEntry("2")])
    vu = align_unit("S", [], unit(0, "R0"), llm, AlignmentConfig(max_repair_rounds=1))
    assert vu.status == MAX_CONFIDENCE_FALLBACK
    assert vu.llm_calls == 3 == AlignmentConfig(max_repair_rounds=1).unit_call_budget
    assert "no_logprobs" in vu.flags
    assert vu.final_text == "R1"


def test_malformed_then_reminder_recovers():
    llm = ReplayBackend([entry("I think so", 90), entry(ok("fixed format"), 90)])
    vu = align_unit("S", [], unit(0, "X"), llm)
    assert vu.status == VERIFIED and vu.llm_calls == 2


def test_malformed_twice_keeps_original():
    llm = ReplayBackend([entry("hmm", 90), entry("still hmm", 90)])
    vu = align_unit("S", [], unit(0, "X"), llm)
    assert vu.status == UNVERIFIED_KEPT_ORIGINAL and vu.final_text == "X"
    assert vu.llm_calls == 2


def test_confidence_threshold_stops_early():
    llm = ReplayBackend([entry(wrong("Y"), 99.0)])
    cfg = AlignmentConfig(confidence_threshold=95.0)
    vu = align_unit("S", [], unit(0, "X"), llm, cfg)
    assert vu.status == MAX_CONFIDENCE_FALLBACK and vu.llm_calls == 1
    assert "confidence_threshold" in vu.flags


def test_zero_repair_rounds():
    llm = ReplayBackend([entry(wrong("Y"), 80.0)])
    vu = align_unit("S", [], unit(0, "X"), llm, AlignmentConfig(max_repair_rounds=0))
    assert vu.llm_calls == 1 and vu.final_text == "X"


def test_eulerian_path(eulerian_buggy):
    fixture = load_fixture(DATA / "mbpp77_replay.jsonl")
    llm = ReplayBackend(fixture[1:6])
    path = align_path("SPEC", extract_units(eulerian_buggy), llm)
    assert path.converged
    assert [vu.repairs for vu in path.units] == [0, 1, 1]
    assert [round(c.confidence, 2) for vu in path.units for c in vu.candidates] == [96.50, 98.96, 97.61, 98.70, 98.71]
    assert path.llm_calls == 5
    assert "`if m == 0' is satisfied" in path.units[1].final_text
    # the working transcript keeps the rejected attempts; the history does not
    assert len([m for m in path.transcript if m.role == "user" and m.content.startswith("Unit 2")]) == 2
    assert len(path.history()) == 6


def test_all_ok_path_uses_one_call_per_unit():
    llm = ReplayBackend([entry(ok(), 99) for _ in range(4)])
    path = align_path("S", [unit(i, f"U{i}") for i in range(4)], llm)
    assert path.converged and path.llm_calls == 4


def test_empty_units():
    with pytest.raises(EmptyUnits):
        align_path("S", [], ReplayBackend([]))


def test_client_failure_keeps_partial_path():
    llm = ReplayBackend([entry(ok(), 99)])
    with pytest.raises(AlignmentAborted) as info:
        align_path("S", [unit(0, "A"), unit(1, "B")], llm)
    assert len(info.value.path.units) == 1
    assert "partial" in info.value.path.degraded


def test_unconverged_path_is_flagged():
    llm = ReplayBackend([entry(wrong("Y"), 90)])
    path = align_path("S", [unit(0, "X")], llm, AlignmentConfig(max_repair_rounds=0))
    assert not path.converged and "not_converged" in path.degraded
