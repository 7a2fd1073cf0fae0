"""Syntax trees for the object language.

The object language is the subset of Python that LLM-written solution
programs use in practice: module-level function definitions (plus top-level
script statements), ``if``/``elif``/``else``, ``while``, ``for``, ``return``,
assignments, expression statements and a handful of simple statements
(``pass``, ``break``, ``continue``, ``import``, ``assert``, ``raise``,
``del``). Lexing and indentation handling are delegated to the interpreter's
own tokenizer through :mod:`ast`; this module converts the result into
:class:`SyntaxNode` trees that carry byte-exact spans and verbatim text, and
rejects everything outside the subset with :class:`UnsupportedConstruct`.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field
from typing import Iterator

from ralu.errors import RaluError

MODULE_FUNCTION = "<module>"

SIMPLE_KINDS = frozenset(
    {
        "Return",
        "Assign",
        "AugAssign",
        "ExprStmt",
        "Pass",
        "Break",
        "Continue",
        "Import",
        "Assert",
        "Raise",
        "Delete",
    }
)
COMPOUND_KINDS = frozenset({"If", "While", "For"})
TERMINATOR_KINDS = frozenset({"Return", "Raise", "Break", "Continue"})


@dataclass(frozen=True)
class Span:
    byte_start: int
    byte_end: int
    line: int

    def __post_init__(self):
        if not 0 <= self.byte_start < self.byte_end:
            raise ValueError(f"invalid span [{self.byte_start}, {self.byte_end})")


class FrontendError(RaluError):
    pass


class SourceSyntaxError(FrontendError, SyntaxError):
    """Malformed object-language input."""

    def __init__(self, span: Span | None, message: str):
        self.span = span
        self.message = message
        where = f"line {span.line}: " if span else ""
        FrontendError.__init__(self, f"{where}{message}")

    def __str__(self):
        return self.args[0]


class UnsupportedConstruct(FrontendError):
    """Valid Python that falls outside the supported subset."""

    def __init__(self, span: Span | None, construct: str):
        self.span = span
        self.construct = construct
        where = f"line {span.line}: " if span else ""
        super().__init__(f"{where}unsupported construct: {construct}")


class FunctionNotFound(FrontendError):
    pass


@dataclass(frozen=True, eq=False)
class SyntaxNode:
    """One node of the object-language tree.

    ``children`` is the then-body for ``If`` nodes; the else-body lives in
    ``orelse`` (an ``elif`` is a lone nested ``If`` there). ``header`` is the
    verbatim header of a compound statement without its trailing colon,
    e.g. ``"if m < 0 or m >= n"`` or ``"for x in items"``.
    """

    kind: str
    span: Span
    text: str
    children: tuple[SyntaxNode, ...] = ()
    orelse: tuple[SyntaxNode, ...] = ()
    name: str | None = None
    params: tuple[str, ...] = ()
    header: str | None = None
    cond_text: str | None = None
    target_text: str | None = None
    iter_text: str | None = None

    @property
    def is_simple(self) -> bool:
        return self.kind in SIMPLE_KINDS

    @property
    def is_terminator(self) -> bool:
        return self.kind in TERMINATOR_KINDS

    def walk(self) -> Iterator[SyntaxNode]:
        yield self
        for child in self.children + self.orelse:
            yield from child.walk()


@dataclass(frozen=True, eq=False)
class SyntaxTree:
    source: str
    root: SyntaxNode
    _bytes: bytes = field(repr=False, default=b"")

    @property
    def source_bytes(self) -> bytes:
        return self._bytes

    def functions(self) -> list[SyntaxNode]:
        return [n for n in self.root.children if n.kind == "FunctionDef"]

    def script_statements(self) -> list[SyntaxNode]:
        """Top-level statements that are not function definitions."""
        return [n for n in self.root.children if n.kind != "FunctionDef"]

    def function(self, name: str) -> SyntaxNode:
        for fn in self.functions():
            if fn.name == name:
                return fn
        raise FunctionNotFound(name)

    def contains(self, node: SyntaxNode) -> bool:
        return any(n is node for n in self.root.walk())


def parse_program(source: str) -> SyntaxTree:
    """Parse object-language source text into a :class:`SyntaxTree`."""
    if not source or not source.strip():
        raise SourceSyntaxError(None, "empty program")
    data = source.encode("utf-8")
    try:
        module = ast.parse(source)
    except SyntaxError as exc:  # includes IndentationError / TabError
        raise SourceSyntaxError(_error_span(data, exc), f"{type(exc).__name__}: {exc.msg}") from None
    return SyntaxTree(source=source, root=_Converter(data).module(module), _bytes=data)


def slice_statement(tree: SyntaxTree, node: SyntaxNode) -> str:
    """Return the verbatim source text of ``node`` (leading indentation stripped)."""
    raw = tree.source_bytes[node.span.byte_start : node.span.byte_end].decode("utf-8")
    return raw.lstrip(" \t")


def _line_offsets(data: bytes) -> list[int]:
    offsets = [0]
    for i, b in enumerate(data):
        if b == 0x0A:
            offsets.append(i + 1)
    return offsets


def _error_span(data: bytes, exc: SyntaxError) -> Span | None:
    if not exc.lineno:
        return None
    offsets = _line_offsets(data)
    line = min(exc.lineno, len(offsets))
    start = offsets[line - 1]
    end = offsets[line] if line < len(offsets) else len(data)
    if end <= start:
        return None
    return Span(start, end, line)


class _Converter:
    def __init__(self, data: bytes):
        self.data = data
        self.offsets = _line_offsets(data)

    # -- positions ---------------------------------------------------------
    def _offset(self, line: int, col: int) -> int:
        return self.offsets[line - 1] + col

    def span(self, node: ast.AST) -> Span:
        return Span(
            self._offset(node.lineno, node.col_offset),
            self._offset(node.end_lineno, node.end_col_offset),
            node.lineno,
        )

    def text(self, start: int, end: int) -> str:
        return self.data[start:end].decode("utf-8")

    def node_text(self, node: ast.AST) -> str:
        sp = self.span(node)
        return self.text(sp.byte_start, sp.byte_end)

    # -- conversion --------------------------------------------------------
    def module(self, module: ast.Module) -> SyntaxNode:
        body = _strip_docstring(module.body)
        children = []
        for stmt in body:
            if isinstance(stmt, ast.FunctionDef):
                children.append(self.function(stmt))
            else:
                children.append(self.statement(stmt))
        end = len(self.data.rstrip())
        return SyntaxNode(
            kind="Module",
            span=Span(0, max(end, 1), 1),
            text=self.text(0, max(end, 1)),
            children=tuple(children),
        )

    def function(self, fn: ast.FunctionDef) -> SyntaxNode:
        if fn.decorator_list:
            raise UnsupportedConstruct(self.span(fn.decorator_list[0]), "decorator")
        args = fn.args
        for default in args.defaults + [d for d in args.kw_defaults if d is not None]:
            self.check_expr(default)
        params = tuple(
            a.arg for a in args.posonlyargs + args.args + args.kwonlyargs
        )
        if args.vararg:
            params += (args.vararg.arg,)
        if args.kwarg:
            params += (args.kwarg.arg,)
        return SyntaxNode(
            kind="FunctionDef",
            span=self.span(fn),
            text=self.node_text(fn),
            children=self.suite(_strip_docstring(fn.body)),
            name=fn.name,
            params=params,
        )

    def suite(self, stmts: list[ast.stmt]) -> tuple[SyntaxNode, ...]:
        return tuple(self.statement(s) for s in stmts)

    def header(self, node: ast.stmt, last: ast.expr) -> str:
        start = self._offset(node.lineno, node.col_offset)
        end = self._offset(last.end_lineno, last.end_col_offset)
        return self.text(start, end)

    def statement(self, s: ast.stmt) -> SyntaxNode:
        sp = self.span(s)
        text = self.text(sp.byte_start, sp.byte_end)
        if isinstance(s, ast.If):
            self.check_expr(s.test)
            return SyntaxNode(
                kind="If",
                span=sp,
                text=text,
                children=self.suite(s.body),
                orelse=self.suite(s.orelse),
                header=self.header(s, s.test),
                cond_text=self.node_text(s.test),
            )
        if isinstance(s, ast.While):
            if s.orelse:
                raise UnsupportedConstruct(sp, "while-else")
            self.check_expr(s.test)
            return SyntaxNode(
                kind="While",
                span=sp,
                text=text,
                children=self.suite(s.body),
                header=self.header(s, s.test),
                cond_text=self.node_text(s.test),
            )
        if isinstance(s, ast.For):
            if s.orelse:
                raise UnsupportedConstruct(sp, "for-else")
            self.check_expr(s.target)
            self.check_expr(s.iter)
            return SyntaxNode(
                kind="For",
                span=sp,
                text=text,
                children=self.suite(s.body),
                header=self.header(s, s.iter),
                target_text=self.node_text(s.target),
                iter_text=self.node_text(s.iter),
            )
        kind = _SIMPLE_AST.get(type(s))
        if kind is None:
            raise UnsupportedConstruct(sp, _construct_name(s))
        for child in ast.iter_child_nodes(s):
            if isinstance(child, ast.expr):
                self.check_expr(child)
        return SyntaxNode(kind=kind, span=sp, text=text)

    def check_expr(self, expr: ast.expr) -> None:
        for node in ast.walk(expr):
            if isinstance(node, ast.Lambda):
                raise UnsupportedConstruct(self.span(node), "lambda")
            if isinstance(node, (ast.Yield, ast.YieldFrom, ast.Await)):
                raise UnsupportedConstruct(self.span(node), _construct_name(node))
            if isinstance(node, _COMPREHENSIONS):
                if len(node.generators) > 1:
                    raise UnsupportedConstruct(self.span(node), "multi-generator comprehension")
                inner = [n for n in ast.walk(node) if n is not node and isinstance(n, _COMPREHENSIONS)]
                if inner:
                    raise UnsupportedConstruct(self.span(node), "nested comprehension")


_SIMPLE_AST = {
    ast.Return: "Return",
    ast.Assign: "Assign",
    ast.AnnAssign: "Assign",
    ast.AugAssign: "AugAssign",
    ast.Expr: "ExprStmt",
    ast.Pass: "Pass",
    ast.Break: "Break",
    ast.Continue: "Continue",
    ast.Import: "Import",
    ast.ImportFrom: "Import",
    ast.Assert: "Assert",
    ast.Raise: "Raise",
    ast.Delete: "Delete",
}

_COMPREHENSIONS = (ast.ListComp, ast.SetComp, ast.DictComp, ast.GeneratorExp)

_CONSTRUCT_NAMES = {
    ast.ClassDef: "class definition",
    ast.Try: "exception handler",
    ast.With: "context manager",
    ast.AsyncWith: "context manager",
    ast.AsyncFunctionDef: "async function",
    ast.AsyncFor: "async for",
    ast.FunctionDef: "nested function definition",
    ast.Global: "global declaration",
    ast.Nonlocal: "nonlocal declaration",
    ast.Yield: "yield",
    ast.YieldFrom: "yield",
    ast.Await: "await",
}


def _construct_name(node: ast.AST) -> str:
    return _CONSTRUCT_NAMES.get(type(node), type(node).__name__)


def _strip_docstring(body: list[ast.stmt]) -> list[ast.stmt]:
    if (
        body
        and isinstance(body[0], ast.Expr)
        and isinstance(body[0].value, ast.Constant)
        and isinstance(body[0].value.value, str)
    ):
        return body[1:]
    return body
