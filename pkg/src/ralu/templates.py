"""Versioned prompt templates shipped under ``ralu/prompts``."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

VERSION = "v1"


@lru_cache(maxsize=None)
def template(name: str, version: str = VERSION) -> str:
    path = resources.files("ralu") / "prompts" / f"{name}.{version}.txt"
    return path.read_text(encoding="utf-8").rstrip("\n")


def render(name: str, **fields) -> str:
    return template(name).format(**fields)
