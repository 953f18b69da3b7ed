"""The ``.net`` optical-table language."""

from importlib import resources

from .compiler import (CompiledCircuit, compile_text, render, run, simulate,
                       validate_and_compile)
from .parser import NetlistAst, NetlistError, NetlistSyntaxError, parse


def corpus_path(name: str = ""):
    """Path of a bundled netlist (or of the corpus directory)."""
    base = resources.files(__package__) / "data"
    return base / name if name else base


__all__ = ["CompiledCircuit", "NetlistAst", "NetlistError", "NetlistSyntaxError",
           "compile_text", "corpus_path", "parse", "render", "run", "simulate",
           "validate_and_compile"]
