import pytest

from conftest import read_program
from ralu.frontend import build_cfg, parse_program
from ralu.units import (
    ASCII_QUOTES,
    CFG,
    LINE_BY_LINE,
    NL_STEPS,
    NoStepsFound,
    extract_units,
    extract_units_cfg,
    extract_units_line_by_line,
    extract_units_nl_steps,
    render_run,
)

RECURRENCE = "return (n - m) * eulerian_num(n - 1, m - 1) + (m + 1) * eulerian_num(n - 1, m)"

# written out by hand from the reference unit list
EULERIAN_UNITS = [
    "#ENTER FUNCTION# eulerian_num\n"
    "#BRANCH# If Condition `if m < 0 or m >= n' is satisfied, then RUN `return 0'",
    "#BRANCH# Otherwise, when Condition `if m < 0 or m >= n' is not satisfied, then "
    "#BRANCH# If Condition `if n == 0' is satisfied, then RUN `return 1'",
    "#BRANCH# Otherwise, when Condition `if n == 0' is not satisfied, then "
    f"RUN `{RECURRENCE}'\n#EXIT FUNCTION#",
]


def test_eulerian_units_match_reference(eulerian_buggy):
    cfg = build_cfg(parse_program(eulerian_buggy), "eulerian_num")
    seq = extract_units_cfg(cfg)
    assert seq.texts == EULERIAN_UNITS
    assert [u.index for u in seq] == [0, 1, 2]
    assert seq.strategy == CFG and not seq.degraded


def test_ascii_quotes(eulerian_buggy):
    seq = extract_units(eulerian_buggy, quotes=ASCII_QUOTES)
    assert 'RUN "return 0"' in seq.texts[0]
    assert "`" not in "".join(seq.texts)


def test_render_run_single_and_many():
    assert render_run(["x = 1"]) == "RUN `x = 1'"
    assert render_run(["x = 1", "return x"]) == "RUN [\nx = 1\nreturn x\n]"


def test_straight_line_function_is_one_unit():
    seq = extract_units(read_program("fruit_distribution.py"))
    assert len(seq) == 1
    assert seq.texts[0] == (
        "#ENTER FUNCTION# fruit_distribution\nRUN [\nparts = s.split()\n"
        "apple_count = int(parts[0])\norange_count = int(parts[2])\n"
        "mango_count = n - apple_count - orange_count\nreturn mango_count\n]\n#EXIT FUNCTION#"
    )


def test_loop_units():
    seq = extract_units(read_program("gcd.py"))
    assert seq.texts == [
        "#ENTER FUNCTION# gcd\n#LOOP BEGIN# `while b'\nRUN `a, b = b, a % b'\n#LOOP END#",
        "RUN `return abs(a)'\n#EXIT FUNCTION#",
    ]


def test_if_else_units():
    src = "def sign(x):\n    if x < 0:\n        s = -1\n    else:\n        s = 1\n    return s\n"
    seq = extract_units(src)
    assert seq.texts == [
        "#ENTER FUNCTION# sign\n#BRANCH# If Condition `if x < 0' is satisfied, then RUN `s = -1'",
        "#BRANCH# Otherwise, when Condition `if x < 0' is not satisfied, then RUN `s = 1'",
        "RUN `return s'\n#EXIT FUNCTION#",
    ]


def test_deep_nesting_starts_new_unit():
    seq = extract_units(read_program("collatz_steps.py"))
    assert len(seq) == 5
    assert seq.texts[1].startswith("#LOOP BEGIN# `while n != 1'")
    assert seq.texts[-1] == "RUN `return steps'\n#EXIT FUNCTION#"


def test_entry_point_selects_function():
    seq = extract_units(read_program("mean_of_positive.py"), entry_point="mean_of_positive")
    assert seq.texts[0].startswith("#ENTER FUNCTION# mean_of_positive")


def test_line_by_line_counts_code_lines():
    src = read_program("eulerian_num_buggy.py")
    seq = extract_units_line_by_line(src)
    assert len(seq) == 6
    assert seq.texts[1] == "RUN `    if m < 0 or m >= n:'"
    assert seq.strategy == LINE_BY_LINE


def test_line_by_line_skips_blank_and_comment_lines():
    seq = extract_units_line_by_line(read_program("fruit_distribution.py"))
    assert len(seq) == 6


def test_unparseable_program_falls_back():
    src = "def f(x):\n    return (x\n"
    seq = extract_units(src, CFG)
    assert seq.strategy == LINE_BY_LINE
    assert seq.degraded and seq.degraded[0].startswith("cfg_fallback")
    assert len(seq) == 2


def test_unsupported_program_falls_back():
    src = "def f(x):\n    try:\n        return 1\n    except ValueError:\n        return 2\n"
    seq = extract_units(src)
    assert seq.degraded and "exception handler" in seq.degraded[0]


def test_nl_steps_follow_step_numbers():
    reply = (
        "<Step>2: He gives away 4, so 10 - 4 = 6.</Step>\n"
        "<Step>1: John starts with 10 apples.</Step>\n"
        "<Step>3: He then receives 5 more apples, so 6 + 5 = 11.</Step>\n<Answer>11</Answer>"
    )
    seq = extract_units_nl_steps(reply)
    assert seq.strategy == NL_STEPS
    assert [u.text for u in seq] == [
        "1: John starts with 10 apples.",
        "2: He gives away 4, so 10 - 4 = 6.",
        "3: He then receives 5 more apples, so 6 + 5 = 11.",
    ]


def test_nl_steps_missing():
    with pytest.raises(NoStepsFound):
        extract_units_nl_steps("<Answer>11</Answer>")
