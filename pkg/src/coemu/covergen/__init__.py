"""Static coverpoint extraction from a SystemVerilog subset.

parse -> extract -> emit: a hand-written lexer and recursive-descent
parser build an AST for the supported grammar, and the extractor
collects one coverpoint per if condition, ternary condition, and case
select, flagging statically-decided conditions.  The grammar subset is
documented in docs/sv-subset.md.
"""

from __future__ import annotations

import sys
from pathlib import Path

from .extract import (KIND_CASE, KIND_CASE_ARM, KIND_IF, KIND_TERNARY,
                      CoverpointDesc, emit_json, emit_text, emitted, extract,
                      renumber)
from .lexer import Span, tokenize
from .nodes import to_source
from .parser import SyntaxIssue, parse_source

__all__ = [
    "CoverpointDesc", "Span", "SyntaxIssue",
    "KIND_IF", "KIND_TERNARY", "KIND_CASE", "KIND_CASE_ARM",
    "parse_source", "extract", "extract_files", "renumber",
    "emit_json", "emit_text", "emitted", "to_source", "tokenize",
    "main_from_args",
]


def extract_files(paths, *, per_case_arm: bool = False):
    """Parse and extract several files; ids run densely across them in
    argument order.  Returns (points, issues)."""
    points = []
    issues = []
    for path in paths:
        text = Path(path).read_text()
        modules, file_issues = parse_source(text, file=str(path))
        issues.extend(file_issues)
        points.extend(renumber(extract(modules, per_case_arm=per_case_arm),
                               len(points)))
    return points, issues


def main_from_args(args) -> int:
    """CLI behavior behind `coemu covergen`: any syntax error exits 3."""
    try:
        points, issues = extract_files(args.files, per_case_arm=args.per_case_arm)
    except FileNotFoundError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    if issues:
        for issue in issues:
            print(issue, file=sys.stderr)
        return 3
    if args.format == "json":
        print(emit_json(points, include_static=args.include_static))
    else:
        text = emit_text(points, include_static=args.include_static)
        if text:
            print(text)
    return 0
