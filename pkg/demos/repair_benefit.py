"""
When does a repair loop help?
=============================

A judge that sometimes flags correct steps will send them to repair, and a
repair can break them. Whether one judge-and-repair pass raises the chance a
step is right depends on four numbers:

* ``alpha``: chance the judge says OK to a correct step
* ``beta``: enters through ``1 - beta``, the chance an incorrect step is flagged
* ``p``: chance the step was right to begin with
* ``gamma``: chance a repair produces a correct step

This script evaluates the closed forms, checks one against simulation, and
sweeps the prior ``p`` to show where the repair threshold crosses ``gamma``.
"""

import numpy as np

from ralu.analysis import (
    JudgeModel,
    binomial_tolerance,
    is_repair_beneficial,
    repair_benefit_threshold,
    repaired_correctness,
    simulate_judge_repair,
)

m = JudgeModel(alpha=0.9, beta=0.8, p=0.6, gamma_repair=0.7)
print(f"p' = {repaired_correctness(m):.6f}")
print(f"threshold = {repair_benefit_threshold(m):.6f}  (gamma = {m.gamma_repair})")
print(f"beneficial: {is_repair_beneficial(m)}\n")

# a million simulated steps should land within three standard errors
est = simulate_judge_repair(m, 10**6, seed=0)
tol = binomial_tolerance(repaired_correctness(m), 10**6)
print(f"simulated p' = {est:.6f}, |error| = {abs(est - repaired_correctness(m)):.6f} <= {tol:.6f}\n")

# a strong model gains little: most flags now land on steps that were fine
print("   p    p'      threshold  beneficial")
for p in np.linspace(0.1, 0.95, 8):
    row = JudgeModel(0.9, 0.8, float(p), 0.7)
    print(f"{p:5.2f}  {repaired_correctness(row):.4f}  {repair_benefit_threshold(row):9.4f}  {is_repair_beneficial(row)}")
