"""Python interface to the robust constant-time toolkit.

Thin wrappers over the native module: JSON-string results are decoded into
dictionaries, everything else passes through unchanged.
"""

import json

from ._core import (
    IrError,
    check_library_text,
    gen_attackers,
    parse_roundtrip,
    trace_program,
)
from . import _core

__all__ = [
    "IrError",
    "parse_roundtrip",
    "check_library_text",
    "robust_check",
    "compile_library",
    "trace_program",
    "gen_attackers",
    "run_bench",
]


def robust_check(text, model, budget=100, seed=0, speculator="sweep:1|2"):
    """Check a library against an attacker model; returns the verdict dict."""
    return json.loads(_core.robust_check(text, model, budget, seed, speculator))


def compile_library(text, model):
    """Apply mitigations; returns (library_text, report_dict)."""
    lib, report = _core.compile_library(text, model)
    return lib, json.loads(report)


def run_bench(template_text, models, sizes):
    """Run the cost benchmark; returns the report dict."""
    return json.loads(_core.run_bench(template_text, list(models), list(sizes)))
