"""Control-flow graphs over object-language functions.

Blocks are maximal runs of simple statements; every ``if``/``while``/``for``
header gets a block of its own (role ``CondHeader``). Conventions:

* ``If`` headers leave through one ``BranchTrue`` and one ``BranchFalse`` edge.
* Loop headers enter the body through ``BranchTrue`` and leave through
  ``LoopExit``; fall-through at the end of the body returns with ``LoopBack``.
  ``LoopExit`` is emitted even for ``while True`` since termination is not
  decided statically.
* ``return``/``raise`` blocks flow to the exit block, ``break`` to the
  statement after the loop, ``continue`` back to the header.
* ``pass`` is an ordinary statement; docstrings and comments are not.

Statements after an unconditional jump are rejected as
:class:`UnsupportedConstruct` so that every block stays reachable.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from ralu.frontend.syntax import (
    MODULE_FUNCTION,
    FunctionNotFound,
    SyntaxNode,
    SyntaxTree,
    UnsupportedConstruct,
    slice_statement,
)

ENTRY, EXIT, BODY, COND_HEADER = "Entry", "Exit", "Body", "CondHeader"
SEQ, BRANCH_TRUE, BRANCH_FALSE, LOOP_BACK, LOOP_EXIT = (
    "Seq",
    "BranchTrue",
    "BranchFalse",
    "LoopBack",
    "LoopExit",
)
TRUE_KINDS = frozenset({BRANCH_TRUE, LOOP_BACK})
FALSE_KINDS = frozenset({BRANCH_FALSE, LOOP_EXIT})


@dataclass(frozen=True, eq=False)
class Statement:
    node: SyntaxNode
    text: str


@dataclass(eq=False)
class BasicBlock:
    id: int
    role: str
    statements: list[Statement] = field(default_factory=list)
    # ids of the loop headers enclosing this block, outermost first
    loops: tuple[int, ...] = ()

    @property
    def construct(self) -> str | None:
        """``"If"``, ``"While"`` or ``"For"`` for header blocks, else None."""
        if self.role != COND_HEADER:
            return None
        return self.statements[0].node.kind

    @property
    def is_loop_header(self) -> bool:
        return self.construct in ("While", "For")

    @property
    def header_text(self) -> str | None:
        return self.statements[0].text if self.role == COND_HEADER else None


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    kind: str


@dataclass(eq=False)
class ControlFlowGraph:
    function_name: str
    entry: int
    exit: int
    blocks: list[BasicBlock]
    edges: list[Edge]

    def block(self, block_id: int) -> BasicBlock:
        return self.blocks[block_id]

    def out_edges(self, block_id: int) -> list[Edge]:
        return [e for e in self.edges if e.src == block_id]

    def successor(self, block_id: int, *kinds: str) -> int | None:
        for e in self.edges:
            if e.src == block_id and e.kind in kinds:
                return e.dst
        return None

    def reachable(self) -> set[int]:
        seen = {self.entry}
        queue = deque([self.entry])
        while queue:
            b = queue.popleft()
            for e in self.out_edges(b):
                if e.dst not in seen:
                    seen.add(e.dst)
                    queue.append(e.dst)
        return seen

    def statements(self) -> list[Statement]:
        """Every non-header statement, in block order."""
        return [s for b in self.blocks if b.role == BODY for s in b.statements]


@dataclass
class _LoopFrame:
    header: int
    breaks: list[tuple[int, str]] = field(default_factory=list)


class _Builder:
    def __init__(self, tree: SyntaxTree, name: str):
        self.tree = tree
        self.name = name
        self.blocks: list[BasicBlock] = []
        self.edges: list[Edge] = []
        self.to_exit: list[tuple[int, str]] = []

    def new_block(self, role: str, loops: tuple[int, ...]) -> BasicBlock:
        block = BasicBlock(id=len(self.blocks), role=role, loops=loops)
        self.blocks.append(block)
        return block

    def connect(self, sources: list[tuple[int, str]], dst: int) -> None:
        for src, kind in sources:
            self.edges.append(Edge(src, dst, kind))

    def build(self, body: tuple[SyntaxNode, ...]) -> ControlFlowGraph:
        entry = self.new_block(ENTRY, ())
        dangling = self.suite(body, [(entry.id, SEQ)], ())
        exit_block = self.new_block(EXIT, ())
        self.connect(self.to_exit + dangling, exit_block.id)
        return ControlFlowGraph(self.name, entry.id, exit_block.id, self.blocks, self.edges)

    def suite(
        self,
        stmts: tuple[SyntaxNode, ...],
        incoming: list[tuple[int, str]],
        loops: tuple[_LoopFrame, ...],
    ) -> list[tuple[int, str]]:
        loop_ids = tuple(f.header for f in loops)
        current: BasicBlock | None = None
        for i, stmt in enumerate(stmts):
            if not incoming and current is None:
                raise UnsupportedConstruct(stmt.span, "unreachable code")
            if stmt.is_simple:
                if current is None:
                    current = self.new_block(BODY, loop_ids)
                    self.connect(incoming, current.id)
                    incoming = [(current.id, SEQ)]
                current.statements.append(Statement(stmt, slice_statement(self.tree, stmt)))
                if stmt.is_terminator:
                    self.jump(stmt, current.id, loops)
                    incoming = []
                    current = None
                continue
            current = None
            header = self.new_block(COND_HEADER, loop_ids)
            header.statements.append(Statement(stmt, stmt.header))
            self.connect(incoming, header.id)
            if stmt.kind == "If":
                then_out = self.suite(stmt.children, [(header.id, BRANCH_TRUE)], loops)
                if stmt.orelse:
                    else_out = self.suite(stmt.orelse, [(header.id, BRANCH_FALSE)], loops)
                else:
                    else_out = [(header.id, BRANCH_FALSE)]
                incoming = then_out + else_out
            else:
                frame = _LoopFrame(header.id)
                body_out = self.suite(stmt.children, [(header.id, BRANCH_TRUE)], loops + (frame,))
                self.connect([(b, LOOP_BACK if k == SEQ else k) for b, k in body_out], header.id)
                incoming = [(header.id, LOOP_EXIT)] + frame.breaks
        return incoming

    def jump(self, stmt: SyntaxNode, block: int, loops: tuple[_LoopFrame, ...]) -> None:
        if stmt.kind in ("Return", "Raise"):
            self.to_exit.append((block, SEQ))
        elif not loops:
            raise UnsupportedConstruct(stmt.span, f"{stmt.kind.lower()} outside loop")
        elif stmt.kind == "Break":
            loops[-1].breaks.append((block, SEQ))
        else:
            self.edges.append(Edge(block, loops[-1].header, LOOP_BACK))


def build_cfg(tree: SyntaxTree, function: str) -> ControlFlowGraph:
    """Build the CFG of ``function``; ``"<module>"`` selects top-level script code."""
    if function == MODULE_FUNCTION:
        body = tuple(tree.script_statements())
        if not body:
            raise FunctionNotFound(function)
    else:
        body = tree.function(function).children
    return _Builder(tree, function).build(body)


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")


def cfg_to_dot(cfg: ControlFlowGraph) -> str:
    """Render ``cfg`` as deterministic DOT text."""
    lines = [f'digraph "{_dot_escape(cfg.function_name)}" {{', "  node [shape=box];"]
    for b in cfg.blocks:
        if b.role == ENTRY:
            lines.append(f'  b{b.id} [label="ENTRY", shape=oval];')
        elif b.role == EXIT:
            lines.append(f'  b{b.id} [label="EXIT", shape=oval];')
        elif b.role == COND_HEADER:
            lines.append(f'  b{b.id} [label="{_dot_escape(b.header_text)}", shape=diamond];')
        else:
            label = "\n".join(s.text for s in b.statements)
            lines.append(f'  b{b.id} [label="{_dot_escape(label)}"];')
    for e in cfg.edges:
        lines.append(f'  b{e.src} -> b{e.dst} [label="{e.kind}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
