import pytest

from ralu.analysis import (
    DegenerateJudge,
    JudgeModel,
    PosteriorInputs,
    binomial_tolerance,
    is_repair_beneficial,
    posterior_correctness,
    repair_benefit_threshold,
    repaired_correctness,
    simulate_judge_repair,
)


def test_perfect_judge_keeps_p():
    assert repaired_correctness(JudgeModel(1, 1, 0.6, 0.3)) == 0.6


def test_worked_example():
    m = JudgeModel(0.9, 0.8, 0.6, 0.7)
    assert repaired_correctness(m) == pytest.approx(0.638, abs=1e-15)
    assert repair_benefit_threshold(m) == pytest.approx(0.06 / 0.14, abs=1e-15)
    assert is_repair_beneficial(m)


def test_zero_prior():
    assert repaired_correctness(JudgeModel(0.3, 0.5, 0.0, 0.4)) == pytest.approx(0.2)


def test_threshold_without_false_negatives():
    assert repair_benefit_threshold(JudgeModel(1.0, 0.7, 0.4, 0.5)) == 0.0


@pytest.mark.parametrize("p", [0.0, 0.5, 1.0])
def test_degenerate_judge(p):
    m = JudgeModel(1.0, 1.0, p, 0.5)
    with pytest.raises(DegenerateJudge):
        repair_benefit_threshold(m)
    with pytest.raises(DegenerateJudge):
        is_repair_beneficial(m)


def test_boundary_gamma_is_not_beneficial():
    m = JudgeModel(0.5, 0.5, 0.5, 0.5)
    assert repair_benefit_threshold(m) == 0.5
    assert not is_repair_beneficial(m)
    assert repaired_correctness(m) == m.p


def test_exact_tie_with_inexact_decimals():
    # threshold = 0.05 / (0.05 + 0.05) = 0.5 exactly in decimal arithmetic
    m = JudgeModel(0.9, 0.9, 0.5, 0.5)
    assert not is_repair_beneficial(m)
    assert repaired_correctness(m) == 0.5


def test_gamma_zero_is_never_beneficial():
    assert not is_repair_beneficial(JudgeModel(0.7, 0.2, 0.9, 0.0))


def test_near_perfect_model_row():
    # with p close to 1 most WRONG labels hit correct units, so repairs rarely pay off
    m = JudgeModel(0.9, 0.8, 0.99, 0.7)
    assert repair_benefit_threshold(m) > 0.97
    assert not is_repair_beneficial(m)


def test_out_of_range():
    with pytest.raises(ValueError):
        JudgeModel(1.2, 0.5, 0.5, 0.5)
    with pytest.raises(ValueError):
        PosteriorInputs(0.0, 2.0)
    with pytest.raises(ValueError):
        PosteriorInputs(0.5, 0.0)


def test_posterior_examples():
    assert posterior_correctness(PosteriorInputs(0.3, 1.0)) == 0.3
    assert posterior_correctness(PosteriorInputs(0.5, 3.0)) == 0.75
    values = [posterior_correctness(PosteriorInputs(0.5, r)) for r in (1, 10, 100, 1e4, 1e8)]
    assert values == sorted(values) and values[-1] > 0.9999


def test_simulation_is_seeded():
    m = JudgeModel(0.9, 0.8, 0.6, 0.7)
    assert simulate_judge_repair(m, 5000, seed=7) == simulate_judge_repair(m, 5000, seed=7)


def test_simulation_matches_worked_example():
    m = JudgeModel(0.9, 0.8, 0.6, 0.7)
    for stratified in (True, False):
        est = simulate_judge_repair(m, 10**6, seed=11, stratified=stratified)
        assert abs(est - 0.638) <= binomial_tolerance(0.638, 10**6) < 0.002


def test_judge_that_never_flags_keeps_p():
    m = JudgeModel(1.0, 1.0, 0.3, 0.9)
    est = simulate_judge_repair(m, 200_000, seed=1, stratified=False)
    assert abs(est - 0.3) <= binomial_tolerance(0.3, 200_000)


def test_single_trial():
    assert simulate_judge_repair(JudgeModel(0.5, 0.5, 0.5, 0.5), 1, seed=3) in (0.0, 1.0)
    with pytest.raises(ValueError):
        simulate_judge_repair(JudgeModel(0.5, 0.5, 0.5, 0.5), 0)


def test_multi_chunk_simulation():
    m = JudgeModel(0.9, 0.8, 0.6, 0.7)
    est = simulate_judge_repair(m, 2_500_000, seed=5)
    assert abs(est - 0.638) <= binomial_tolerance(0.638, 2_500_000)
