"""Closed-form calculators for judge-and-repair correctness, plus a Monte-Carlo oracle.

A judge labels a unit OK or WRONG. It says OK on a correct unit with
probability ``alpha``. An incorrect unit is flagged WRONG with probability
``1 - beta``, which is how ``beta`` enters the closed form for p'; the
simulator uses the same convention so the two agree. Units labelled WRONG are
repaired and the repair is correct with probability ``gamma_repair``. Units
labelled OK are kept as they are.

Closed forms are evaluated in exact rational arithmetic on the decimal value
of each input, so boundary cases (gamma exactly at the threshold) come out as
exact ties instead of depending on float rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from ralu.errors import RaluError

SIM_CHUNK = 1 << 20


class DegenerateJudge(RaluError):
    """The judge never says WRONG, so the repair threshold is undefined."""


def _exact(x: float) -> Fraction:
    return Fraction(repr(float(x)))


def _check_unit_interval(name: str, x: float) -> None:
    if not (isinstance(x, (int, float)) and 0.0 <= x <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {x!r}")


@dataclass(frozen=True)
class JudgeModel:
    alpha: float
    beta: float
    p: float
    gamma_repair: float

    def __post_init__(self):
        for name in ("alpha", "beta", "p", "gamma_repair"):
            _check_unit_interval(name, getattr(self, name))

    def _fractions(self):
        return tuple(_exact(v) for v in (self.alpha, self.beta, self.p, self.gamma_repair))


@dataclass(frozen=True)
class PosteriorInputs:
    prior: float
    likelihood_ratio: float

    def __post_init__(self):
        if not 0.0 < self.prior < 1.0:
            raise ValueError(f"prior must lie in (0, 1), got {self.prior!r}")
        if not (self.likelihood_ratio > 0 and math.isfinite(self.likelihood_ratio)):
            raise ValueError(f"likelihood_ratio must be positive and finite, got {self.likelihood_ratio!r}")


def _p_wrong(a: Fraction, b: Fraction, p: Fraction) -> tuple[Fraction, Fraction]:
    # (correct and judged WRONG, incorrect and judged WRONG)
    return (1 - a) * p, (1 - b) * (1 - p)


def _repaired_exact(m: JudgeModel) -> Fraction:
    a, b, p, g = m._fractions()
    false_neg, true_neg = _p_wrong(a, b, p)
    return a * p + g * (false_neg + true_neg)


def _threshold_exact(m: JudgeModel) -> Fraction:
    a, b, p, _ = m._fractions()
    false_neg, true_neg = _p_wrong(a, b, p)
    denom = false_neg + true_neg
    if denom == 0:
        raise DegenerateJudge("judge never answers WRONG for this (alpha, beta, p)")
    return false_neg / denom


def repaired_correctness(m: JudgeModel) -> float:
    """Probability a unit is correct after one judge-and-repair pass (p')."""
    return float(_repaired_exact(m))


def repair_benefit_threshold(m: JudgeModel) -> float:
    """P(unit correct | judge says WRONG); repairs help iff gamma exceeds it."""
    return float(_threshold_exact(m))


def is_repair_beneficial(m: JudgeModel) -> bool:
    """True iff gamma_repair is strictly above the threshold (equivalently p' > p)."""
    return _exact(m.gamma_repair) > _threshold_exact(m)


def posterior_correctness(inp: PosteriorInputs) -> float:
    """Bayes update of the prior ``q`` by likelihood ratio ``r``: rq / (rq + 1 - q)."""
    q, r = _exact(inp.prior), _exact(inp.likelihood_ratio)
    return float(r * q / (r * q + 1 - q))


def _draw_uniforms(rng: np.random.Generator, n: int, stratified: bool) -> np.ndarray:
    if not stratified:
        return rng.random((3, n), dtype=np.float32)
    # Latin hypercube: each coordinate puts exactly one draw in each of n strata
    strata = np.stack([rng.permutation(n).astype(np.float32) for _ in range(3)])
    return (strata + rng.random((3, n), dtype=np.float32)) / np.float32(n)


@lru_cache(maxsize=2)
def _seeded_uniforms(seed: int, n: int, stratified: bool) -> np.ndarray:
    u = _draw_uniforms(np.random.default_rng(seed), n, stratified)
    u.setflags(write=False)
    return u


def simulate_judge_repair(
    m: JudgeModel, trials: int, seed: int | None = 0, stratified: bool = True
) -> float:
    """Empirical p' from ``trials`` simulated units; reproducible for a given seed.

    Each trial draws correctness, the judge's label and the repair outcome
    from three uniforms. With ``stratified`` (the default) the uniforms are
    Latin-hypercube samples: every trial is still marginally a fresh draw, so
    the estimate stays unbiased, but its variance is lower than plain sampling.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if isinstance(seed, int) and trials <= SIM_CHUNK:
        # a fixed seed fixes the draws, so sweeps over parameters reuse them
        chunks = [_seeded_uniforms(seed, trials, stratified)]
    else:
        rng = np.random.default_rng(seed)
        sizes = [SIM_CHUNK] * (trials // SIM_CHUNK) + ([trials % SIM_CHUNK] if trials % SIM_CHUNK else [])
        chunks = (_draw_uniforms(rng, n, stratified) for n in sizes)
    correct_total = 0
    for u in chunks:
        correct = u[0] < m.p
        says_ok = np.where(correct, u[1] < m.alpha, u[1] < m.beta)
        repaired_ok = u[2] < m.gamma_repair
        final = np.where(says_ok, correct, repaired_ok)
        correct_total += int(np.count_nonzero(final))
    return correct_total / trials


def binomial_tolerance(p: float, trials: int, k: float = 3.0) -> float:
    """``k`` binomial standard errors for a proportion ``p`` estimated from ``trials`` draws."""
    return k * math.sqrt(p * (1.0 - p) / trials)
