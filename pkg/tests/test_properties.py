import math

from fractions import Fraction

from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import entry, ok, wrong
from ralu.alignment import (
    MAX_CONFIDENCE_FALLBACK,
    WRONG,
    AlignmentConfig,
    UnitCandidate,
    Verdict,
    align_unit,
    clamp_probability,
    confidence_score,
    rank_candidates,
)
from ralu.analysis import (
    JudgeModel,
    PosteriorInputs,
    is_repair_beneficial,
    posterior_correctness,
    repair_benefit_threshold,
    repaired_correctness,
)
from ralu.llm import ReplayBackend
from ralu.synthesis import extract_code_block, normalize_answer
from ralu.units import LogicUnit

logprob = st.floats(min_value=-50.0, max_value=0.0, allow_nan=False)
prob = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


@given(st.lists(logprob, min_size=1, max_size=40))
def test_confidence_bounds(lps):
    for lp in lps:
        assert 0.005 < clamp_probability(lp) <= 1.0
    score = confidence_score(lps)
    assert 0.5 < score <= 100.0


@given(logprob, logprob)
def test_clamped_probability_is_monotone(a, b):
    if a <= b:
        assert clamp_probability(a) <= clamp_probability(b)


def ranked(confs):
    return [UnitCandidate(f"c{i}", Verdict(WRONG, "f", ""), c, i) for i, c in enumerate(confs)]


@given(st.lists(st.floats(min_value=0.5, max_value=100.0), min_size=1, max_size=8))
def test_rank_picks_first_maximum_and_is_scale_invariant(confs):
    best = rank_candidates(ranked(confs))
    assert best == confs.index(max(confs))
    assert rank_candidates(ranked([c * 10 for c in confs])) == best


code_body = st.text(st.characters(blacklist_characters="<`", blacklist_categories=("Cs",)), min_size=1).map(
    lambda s: s.strip("\n")
).filter(bool)


@given(code_body)
def test_extraction_is_idempotent(body):
    once = extract_code_block(f"Here you go:\n<code>\n{body}\n</code>\nDone.")
    assert once == body
    assert extract_code_block(f"<code>\n{once}\n</code>") == once


@given(st.text(max_size=30))
def test_normalization_is_idempotent(text):
    once = normalize_answer(text)
    assert normalize_answer(once) == once


judge_models = st.builds(JudgeModel, prob, prob, prob, prob)


@given(judge_models)
def test_benefit_iff_improvement(m):
    a, b, p = (Fraction(repr(x)) for x in (m.alpha, m.beta, m.p))
    assume((1 - a) * p + (1 - b) * (1 - p) > 0)
    exact_pprime = a * p + Fraction(repr(m.gamma_repair)) * ((1 - a) * p + (1 - b) * (1 - p))
    assert is_repair_beneficial(m) == (exact_pprime > p)
    assert is_repair_beneficial(m) == (m.gamma_repair > repair_benefit_threshold(m) or
                                       (m.gamma_repair == repair_benefit_threshold(m) and exact_pprime > p))
    assert 0.0 <= repaired_correctness(m) <= 1.0


@given(prob, prob, prob, prob, prob)
def test_pprime_monotone_in_gamma(alpha, beta, p, g1, g2):
    lo, hi = sorted((g1, g2))
    assert repaired_correctness(JudgeModel(alpha, beta, p, lo)) <= repaired_correctness(JudgeModel(alpha, beta, p, hi))


@given(prob, prob, prob, prob, prob)
def test_pprime_monotone_in_alpha_when_repairs_are_imperfect(a1, a2, beta, p, gamma):
    # raising alpha keeps more correct units; it helps exactly when repairs are below certainty
    lo, hi = sorted((a1, a2))
    assert repaired_correctness(JudgeModel(lo, beta, p, gamma)) <= repaired_correctness(JudgeModel(hi, beta, p, gamma)) + 1e-15


@given(st.floats(min_value=0.01, max_value=0.99), st.floats(min_value=1e-3, max_value=1e3))
def test_posterior_moves_toward_evidence(q, r):
    post = posterior_correctness(PosteriorInputs(q, r))
    if r > 1:
        assert post >= q
    elif r < 1:
        assert post <= q
    assert 0.0 < post < 1.0


verdict_step = st.tuples(st.sampled_from(["ok", "wrong", "junk"]), st.floats(min_value=1.0, max_value=100.0))


@settings(max_examples=150, deadline=None)
@given(st.lists(verdict_step, min_size=1, max_size=12), st.integers(0, 4), st.integers(0, 2))
def test_unit_call_budget(script, rounds, malformed):
    entries = []
    for i, (kind, conf) in enumerate(script):
        text = ok() if kind == "ok" else wrong(f"fix {i}") if kind == "wrong" else "I am not sure."
        entries.append(entry(text, conf))
    config = AlignmentConfig(max_repair_rounds=rounds, malformed_retry=malformed)
    llm = ReplayBackend(entries)
    try:
        vu = align_unit("spec", [], LogicUnit(0, "#CODE# RUN `x = 1'", "", "cfg"), llm, config)
    except Exception as exc:  # the script ran out before the unit settled
        assert type(exc).__name__ == "FixtureExhausted"
        assert llm.position <= config.max_repair_rounds + 2
        return
    assert vu.llm_calls == llm.position <= config.max_repair_rounds + 2
    assert vu.repairs <= rounds
    if vu.status == MAX_CONFIDENCE_FALLBACK:
        confs = [c.confidence for c in vu.candidates]
        assert vu.final_text == vu.candidates[confs.index(max(confs))].text
    assert math.isfinite(sum(c.confidence for c in vu.candidates))
