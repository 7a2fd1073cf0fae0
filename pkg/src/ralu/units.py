"""Logic units: cutting a program (or a CoT response) into judgeable steps.

The CFG strategy walks the graph depth-first in source order (true arm
before false arm) and cuts at function entry, conditional headers and loop
boundaries. Each unit is rendered with the marker vocabulary the alignment
prompts expect::

    #ENTER FUNCTION# eulerian_num
    #BRANCH# If Condition `if m < 0 or m >= n' is satisfied, then RUN `return 0'

A conditional that directly follows the start of a branch arm is folded into
the same unit (``... then #BRANCH# If Condition ...``) up to two levels; a
third level starts a new unit. Code after an if/else join point starts a new
unit, as does every loop.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import networkx as nx

from ralu.errors import RaluError
from ralu.frontend import (
    MODULE_FUNCTION,
    ControlFlowGraph,
    FrontendError,
    build_cfg,
    parse_program,
)
from ralu.frontend.cfg import BODY, COND_HEADER, ENTRY, EXIT, BRANCH_TRUE, BRANCH_FALSE, LOOP_EXIT

CFG, LINE_BY_LINE, NL_STEPS = "Cfg", "LineByLine", "NlSteps"

MAX_FOLD_DEPTH = 2


@dataclass(frozen=True)
class Delimiters:
    open: str = "`"
    close: str = "'"

    def quote(self, text: str) -> str:
        return f"{self.open}{text}{self.close}"


DEFAULT_QUOTES = Delimiters("`", "'")
ASCII_QUOTES = Delimiters('"', '"')


@dataclass(frozen=True)
class LogicUnit:
    index: int
    text: str
    label: str
    kind: str
    block_refs: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.text:
            raise ValueError("logic unit text must be non-empty")


@dataclass(frozen=True)
class UnitSequence:
    units: tuple[LogicUnit, ...]
    strategy: str
    source_program: str | None = None
    degraded: tuple[str, ...] = ()

    def __len__(self):
        return len(self.units)

    def __iter__(self):
        return iter(self.units)

    def __getitem__(self, i):
        return self.units[i]

    @property
    def texts(self) -> list[str]:
        return [u.text for u in self.units]


class NoStepsFound(RaluError):
    pass


def render_run(statements: list[str], quotes: Delimiters = DEFAULT_QUOTES) -> str:
    """``RUN `stmt'`` for one statement, a bracketed block for several."""
    if len(statements) == 1:
        return f"RUN {quotes.quote(statements[0])}"
    return "RUN [\n" + "\n".join(statements) + "\n]"


def textualize_unit(pieces: list[tuple[str, bool]]) -> str:
    """Join marker pieces into unit text.

    ``pieces`` is a list of ``(text, inline)`` pairs; inline pieces continue
    the previous line after a single space (used after ``then``), the rest
    start a new line.
    """
    out = ""
    for text, inline in pieces:
        if not out:
            out = text
        elif inline:
            out += " " + text
        else:
            out += "\n" + text
    return out


@dataclass
class _Draft:
    pieces: list[tuple[str, bool]] = field(default_factory=list)
    blocks: list[int] = field(default_factory=list)
    depth: int = 0
    has_content: bool = False
    kind: str = "Linear"
    label: str = ""

    def add(self, text: str) -> None:
        inline = bool(self.pieces) and self.pieces[-1][0].endswith("then")
        self.pieces.append((text, inline))


class _Walker:
    def __init__(self, cfg: ControlFlowGraph, quotes: Delimiters):
        self.cfg = cfg
        self.q = quotes
        self.units: list[_Draft] = []
        self.cur = _Draft()
        self.emitted: set[int] = set()
        graph = nx.DiGraph()
        graph.add_nodes_from(b.id for b in cfg.blocks)
        graph.add_edges_from((e.dst, e.src) for e in cfg.edges)
        self.ipdom = nx.immediate_dominators(graph, cfg.exit)

    # -- unit bookkeeping ------------------------------------------------
    def close(self) -> None:
        if self.cur.has_content:
            self.units.append(self.cur)
            self.cur = _Draft()

    def closer(self, marker: str, block: int | None = None) -> None:
        """Append a closing marker; attach it to the previous unit if nothing is open."""
        target = self.cur if (self.cur.has_content or not self.units) else self.units[-1]
        target.pieces.append((marker, False))
        if block is not None:
            target.blocks.append(block)

    def claim(self, block: int) -> None:
        self.emitted.add(block)
        self.cur.blocks.append(block)

    # -- traversal -------------------------------------------------------
    def run(self) -> list[_Draft]:
        cfg = self.cfg
        name = cfg.function_name
        if name != MODULE_FUNCTION:
            self.cur.add(f"#ENTER FUNCTION# {name}")
            self.cur.kind = "FunctionEntry"
            self.cur.label = f"enter {name}"
        self.claim(cfg.entry)
        start = cfg.successor(cfg.entry, "Seq")
        self.region(start, stop=cfg.exit, loop=None)
        if name != MODULE_FUNCTION:
            self.closer("#EXIT FUNCTION#", cfg.exit)
        else:
            target = self.cur if (self.cur.has_content or not self.units) else self.units[-1]
            target.blocks.append(cfg.exit)
        self.emitted.add(cfg.exit)
        if self.cur.has_content or not self.units:
            self.units.append(self.cur)
        return self.units

    def inside(self, block_id: int, loop: int | None) -> bool:
        return loop is None or loop in self.cfg.block(block_id).loops

    def region(self, b: int | None, stop: int, loop: int | None) -> None:
        cfg = self.cfg
        while b is not None and b != stop and b != cfg.exit and b not in self.emitted:
            if not self.inside(b, loop):
                return
            block = cfg.block(b)
            if block.role == BODY:
                self.claim(b)
                self.cur.add(render_run([s.text for s in block.statements], self.q))
                self.cur.has_content = True
                if not self.cur.label:
                    self.cur.label = block.statements[0].text.splitlines()[0]
                if block.statements[-1].node.is_terminator:
                    return
                b = cfg.successor(b, "Seq")
            elif block.is_loop_header:
                b = self.loop(block, loop)
            else:
                b = self.branch(block, stop, loop)

    def branch(self, block, stop: int, loop: int | None) -> int | None:
        cfg = self.cfg
        cond = self.q.quote(block.header_text)
        join = self.ipdom.get(block.id)
        if self.cur.depth >= MAX_FOLD_DEPTH:
            self.close()
        self.claim(block.id)
        self.cur.add(f"#BRANCH# If Condition {cond} is satisfied, then")
        self.cur.depth += 1
        self.cur.has_content = True
        if self.cur.kind == "Linear":
            self.cur.kind = "Branch"
        if not self.cur.label:
            self.cur.label = f"branch on {block.header_text}"
        self.region(cfg.successor(block.id, BRANCH_TRUE), join, loop)
        false_succ = cfg.successor(block.id, BRANCH_FALSE)
        if false_succ != join and false_succ is not None and false_succ not in self.emitted:
            self.close()
            self.cur = _Draft(kind="Branch", label=f"otherwise {block.header_text}", depth=1)
            self.cur.add(f"#BRANCH# Otherwise, when Condition {cond} is not satisfied, then")
            self.cur.has_content = True
            self.region(false_succ, join, loop)
        if join is None or join == stop or join == cfg.exit or not self.inside(join, loop):
            return None
        self.close()
        self.cur.depth = 0
        return join

    def loop(self, block, loop: int | None) -> int | None:
        cfg = self.cfg
        self.close()
        self.cur.depth = 0
        self.cur.kind = "LoopBody"
        self.cur.label = f"loop {block.header_text}"
        self.claim(block.id)
        self.cur.add(f"#LOOP BEGIN# {self.q.quote(block.header_text)}")
        self.cur.has_content = True
        self.region(cfg.successor(block.id, BRANCH_TRUE), stop=block.id, loop=block.id)
        self.closer("#LOOP END#")
        self.close()
        after = cfg.successor(block.id, LOOP_EXIT)
        if after is None or after == cfg.exit or not self.inside(after, loop):
            return None
        return after


def extract_units_cfg(
    cfg: ControlFlowGraph, quotes: Delimiters = DEFAULT_QUOTES, source_program: str | None = None
) -> UnitSequence:
    """Partition ``cfg`` into logic units and render their annotated text."""
    drafts = _Walker(cfg, quotes).run()
    units = tuple(
        LogicUnit(
            index=i,
            text=textualize_unit(d.pieces),
            label=d.label or d.kind.lower(),
            kind=d.kind,
            block_refs=tuple(d.blocks),
        )
        for i, d in enumerate(drafts)
    )
    return UnitSequence(units=units, strategy=CFG, source_program=source_program)


def _is_code_line(line: str) -> bool:
    stripped = line.strip()
    return bool(stripped) and not stripped.startswith("#")


def extract_units_line_by_line(program: str, quotes: Delimiters = DEFAULT_QUOTES) -> UnitSequence:
    """One unit per non-blank, non-comment line; indentation kept inside the quotes."""
    lines = [ln.rstrip("\r") for ln in program.splitlines() if _is_code_line(ln)]
    units = tuple(
        LogicUnit(index=i, text=f"RUN {quotes.quote(ln)}", label=ln.strip(), kind="Line")
        for i, ln in enumerate(lines)
    )
    return UnitSequence(units=units, strategy=LINE_BY_LINE, source_program=program)


_STEP_RE = re.compile(r"<Step>(.*?)</Step>", re.DOTALL)
_STEP_NUM_RE = re.compile(r"\s*(\d+)\s*[:.)]")


def extract_units_nl_steps(cot_response: str) -> UnitSequence:
    """One unit per ``<Step>k: ...</Step>`` tag, ordered by ``k``."""
    steps = [m.group(1).strip() for m in _STEP_RE.finditer(cot_response)]
    steps = [s for s in steps if s]
    if not steps:
        raise NoStepsFound("response contains no <Step>...</Step> segments")

    def order(item):
        pos, text = item
        m = _STEP_NUM_RE.match(text)
        return (int(m.group(1)) if m else pos, pos)

    ordered = [text for _, text in sorted(enumerate(steps), key=order)]
    units = tuple(
        LogicUnit(index=i, text=s, label=s.splitlines()[0][:60], kind="NlStep")
        for i, s in enumerate(ordered)
    )
    return UnitSequence(units=units, strategy=NL_STEPS)


def entry_function(tree, preferred: str | None = None) -> str:
    """Pick the function to unitize: ``preferred`` if defined, else the first, else script code."""
    names = [f.name for f in tree.functions()]
    if preferred and preferred in names:
        return preferred
    if tree.script_statements() and not names:
        return MODULE_FUNCTION
    if names:
        return names[0]
    return MODULE_FUNCTION


def extract_units(
    program: str,
    strategy: str = CFG,
    entry_point: str | None = None,
    quotes: Delimiters = DEFAULT_QUOTES,
) -> UnitSequence:
    """Unitize a program; CFG extraction falls back to line-by-line on frontend errors."""
    if strategy == LINE_BY_LINE:
        return extract_units_line_by_line(program, quotes)
    if strategy != CFG:
        raise ValueError(f"unknown program strategy {strategy!r}")
    try:
        tree = parse_program(program)
        cfg = build_cfg(tree, entry_function(tree, entry_point))
    except FrontendError as exc:
        seq = extract_units_line_by_line(program, quotes)
        return UnitSequence(
            units=seq.units,
            strategy=LINE_BY_LINE,
            source_program=program,
            degraded=(f"cfg_fallback: {exc}",),
        )
    return extract_units_cfg(cfg, quotes, source_program=program)


__all__ = [
    "ASCII_QUOTES",
    "CFG",
    "Delimiters",
    "LINE_BY_LINE",
    "LogicUnit",
    "NL_STEPS",
    "NoStepsFound",
    "DEFAULT_QUOTES",
    "UnitSequence",
    "entry_function",
    "extract_units",
    "extract_units_cfg",
    "extract_units_line_by_line",
    "extract_units_nl_steps",
    "render_run",
    "textualize_unit",
]
