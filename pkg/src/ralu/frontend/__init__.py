"""Object-language parsing and control-flow graph construction."""

from ralu.frontend.cfg import (
    BasicBlock,
    ControlFlowGraph,
    Edge,
    Statement,
    build_cfg,
    cfg_to_dot,
)
from ralu.frontend.syntax import (
    MODULE_FUNCTION,
    FrontendError,
    FunctionNotFound,
    SourceSyntaxError,
    Span,
    SyntaxNode,
    SyntaxTree,
    UnsupportedConstruct,
    parse_program,
    slice_statement,
)

__all__ = [
    "BasicBlock",
    "ControlFlowGraph",
    "Edge",
    "FrontendError",
    "FunctionNotFound",
    "MODULE_FUNCTION",
    "SourceSyntaxError",
    "Span",
    "Statement",
    "SyntaxNode",
    "SyntaxTree",
    "UnsupportedConstruct",
    "build_cfg",
    "cfg_to_dot",
    "parse_program",
    "slice_statement",
]
