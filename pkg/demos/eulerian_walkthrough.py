"""
Walking one task through the pipeline
=====================================

MBPP task 77 asks for the Eulerian number a(n, m). The first program the
model writes tests ``n == 0`` where it should test ``m == 0``. This script
replays a recorded dialogue and shows each stage: the control flow graph, the
logic units, the judge's verdicts and repairs, and the final program.

Run with ``python3 demos/eulerian_walkthrough.py``. No network is needed.
"""

from importlib import resources

from ralu.frontend import build_cfg, cfg_to_dot, parse_program
from ralu.harness import load_dataset
from ralu.harness.evaluate import evaluate_code
from ralu.harness.strategies import solve_task
from ralu.llm import ReplayBackend, SessionClient

data = resources.files("ralu") / "data"
task = load_dataset(data / "mbpp77.jsonl", "mbpp")[0]
llm = SessionClient(ReplayBackend.from_file(data / "mbpp77_replay.jsonl"))

print("Specification")
print("-------------")
print(task.spec, end="\n\n")

# everything below reads off the outcome of a single call
outcome = solve_task(task, "ralu", llm)

print("Initial program")
print("---------------")
print(outcome.initial_program, end="\n\n")

# the graph the units are cut from, in DOT form
tree = parse_program(outcome.initial_program)
print(cfg_to_dot(build_cfg(tree, "eulerian_num")))

print("Logic units")
print("-----------")
for unit in outcome.units:
    print(f"Unit {unit.index + 1}: {unit.text}\n")

# each unit is judged in turn; a WRONG verdict carries a fix that is re-judged
print("Alignment")
print("---------")
for vu in outcome.path.units:
    for cand in vu.candidates:
        print(f"unit {vu.unit.index + 1} {cand.origin:<10} {cand.verdict.judgment:<5} confidence {cand.confidence:.2f}")
    print(f"  -> {vu.status}, {vu.llm_calls} call(s)")
print()

print("Final program")
print("-------------")
print(outcome.final_output, end="\n\n")

result = evaluate_code(outcome.final_output, task)
prompt_tokens, completion_tokens, calls = llm.usage.report()
print(f"tests passed: {result.passed}")
print(f"LLM calls: {calls} (prompt tokens {prompt_tokens}, completion tokens {completion_tokens})")
