"""Reasoning as logic units: cut a generated program into control-flow units,
align each unit with the specification through a judge/fix/rewind dialogue,
then synthesize the final answer from the aligned path."""

from ralu.alignment import AlignmentConfig, AlignmentPath, ChatSettings, align_path, align_unit, confidence_score
from ralu.errors import RaluError
from ralu.frontend import build_cfg, parse_program
from ralu.llm import BackendConfig, HttpBackend, ReplayBackend, SessionClient
from ralu.sandbox import SandboxPolicy, run_script
from ralu.synthesis import extract_code_block, synthesize
from ralu.units import LogicUnit, UnitSequence, extract_units, extract_units_cfg

__version__ = "0.1.0"

__all__ = [
    "AlignmentConfig",
    "AlignmentPath",
    "BackendConfig",
    "ChatSettings",
    "HttpBackend",
    "LogicUnit",
    "RaluError",
    "ReplayBackend",
    "SandboxPolicy",
    "SessionClient",
    "UnitSequence",
    "align_path",
    "align_unit",
    "build_cfg",
    "confidence_score",
    "extract_code_block",
    "extract_units",
    "extract_units_cfg",
    "parse_program",
    "run_script",
    "synthesize",
]
