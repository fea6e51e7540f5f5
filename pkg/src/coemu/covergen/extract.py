"""Coverpoint extraction: walk the AST, collect every branch condition.

One descriptor per if condition, ternary condition, and case select, in
pre-order (which is source order), so ids are dense from 0 and sorting
by (file, span) reproduces id order.  A condition is static when every
identifier in it is a parameter of its module; static points stay in
the full list, flagged, and are dropped only at emission.

The hierarchical name is module.kindN.digest8: a per-module ordinal
for the kind plus the first 8 hex digits of a hash of the condition's
canonical rendering.  Both halves survive any whitespace or comment
reformatting of the source.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace

from .lexer import Span
from .nodes import (Always, Assign, Begin, Binary, BlockAssign, Case, Concat,
                    Decl, EmptyStmt, Ident, If, Num, Param, Select, Ternary,
                    Unary)

KIND_IF = "if-cond"
KIND_TERNARY = "ternary-cond"
KIND_CASE = "case-select"
KIND_CASE_ARM = "case-arm"

_SHORT = {KIND_IF: "if", KIND_TERNARY: "tern", KIND_CASE: "case",
          KIND_CASE_ARM: "arm"}


@dataclass(frozen=True)
class CoverpointDesc:
    id: int
    hier_name: str
    kind: str
    span: Span
    static: bool

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "hier_name": self.hier_name,
            "kind": self.kind,
            "file": self.span.file,
            "line": self.span.line,
            "col": self.span.col,
            "static": self.static,
        }


def _idents(expr, out: set) -> set:
    if isinstance(expr, Ident):
        out.add(expr.name)
    elif isinstance(expr, Unary):
        _idents(expr.operand, out)
    elif isinstance(expr, Binary):
        _idents(expr.left, out)
        _idents(expr.right, out)
    elif isinstance(expr, Ternary):
        _idents(expr.cond, out)
        _idents(expr.if_true, out)
        _idents(expr.if_false, out)
    elif isinstance(expr, Select):
        _idents(expr.base, out)
        _idents(expr.msb, out)
        if expr.lsb is not None:
            _idents(expr.lsb, out)
    elif isinstance(expr, Concat):
        for p in expr.parts:
            _idents(p, out)
    # Num: nothing
    return out


def _digest8(canonical: str) -> str:
    return hashlib.sha1(canonical.encode()).hexdigest()[:8]


class _Extractor:
    def __init__(self, per_case_arm: bool):
        self.per_case_arm = per_case_arm
        self.points: list[CoverpointDesc] = []
        self._params: set = set()
        self._module = ""
        self._ordinals: dict = {}

    def run(self, modules) -> list[CoverpointDesc]:
        for m in modules:
            self._module = m.name
            self._params = {p.name for p in m.params}
            self._params |= {i.name for i in m.items if isinstance(i, Param)}
            self._ordinals = {k: 0 for k in _SHORT}
            for p in m.params:
                self._expr(p.value)
            for port in m.ports:
                if port.range is not None:
                    self._expr(port.range.msb)
                    self._expr(port.range.lsb)
            for item in m.items:
                self._item(item)
        return self.points

    def _point(self, kind: str, canonical: str, idents: set, span: Span) -> None:
        n = self._ordinals[kind]
        self._ordinals[kind] = n + 1
        hier = f"{self._module}.{_SHORT[kind]}{n}.{_digest8(canonical)}"
        static = idents <= self._params
        self.points.append(CoverpointDesc(
            len(self.points), hier, kind, span, static))

    def _cond_point(self, kind: str, expr) -> None:
        self._point(kind, expr.to_source(), _idents(expr, set()), expr.span)

    # ------------------------------------------------------------- walkers

    def _item(self, item) -> None:
        if isinstance(item, Decl):
            if item.range is not None:
                self._expr(item.range.msb)
                self._expr(item.range.lsb)
        elif isinstance(item, Param):
            self._expr(item.value)
        elif isinstance(item, Assign):
            self._expr(item.lhs)
            self._expr(item.rhs)
        elif isinstance(item, Always):
            self._stmt(item.body)

    def _stmt(self, s) -> None:
        if isinstance(s, Begin):
            for child in s.stmts:
                self._stmt(child)
        elif isinstance(s, If):
            self._cond_point(KIND_IF, s.cond)
            self._expr(s.cond)
            self._stmt(s.then)
            if s.els is not None:
                self._stmt(s.els)
        elif isinstance(s, Case):
            self._cond_point(KIND_CASE, s.select)
            self._expr(s.select)
            for arm in s.arms:
                if arm.labels is not None:
                    if self.per_case_arm:
                        canon = " || ".join(
                            f"({s.select.to_source()} == {l.to_source()})"
                            for l in arm.labels)
                        idents = _idents(s.select, set())
                        for l in arm.labels:
                            _idents(l, idents)
                        self._point(KIND_CASE_ARM, canon, idents, arm.span)
                    for l in arm.labels:
                        self._expr(l)
                self._stmt(arm.body)
        elif isinstance(s, BlockAssign):
            self._expr(s.lhs)
            self._expr(s.rhs)
        elif isinstance(s, EmptyStmt):
            pass

    def _expr(self, e) -> None:
        if isinstance(e, Ternary):
            self._cond_point(KIND_TERNARY, e.cond)
            self._expr(e.cond)
            self._expr(e.if_true)
            self._expr(e.if_false)
        elif isinstance(e, Unary):
            self._expr(e.operand)
        elif isinstance(e, Binary):
            self._expr(e.left)
            self._expr(e.right)
        elif isinstance(e, Select):
            self._expr(e.base)
            self._expr(e.msb)
            if e.lsb is not None:
                self._expr(e.lsb)
        elif isinstance(e, Concat):
            for p in e.parts:
                self._expr(p)
        # Num, Ident: leaves


def extract(modules, *, per_case_arm: bool = False) -> list[CoverpointDesc]:
    """All coverpoints of the parsed modules, ids dense from 0."""
    return _Extractor(per_case_arm).run(modules)


def renumber(points, start: int) -> list[CoverpointDesc]:
    return [replace(p, id=start + i) for i, p in enumerate(points)]


def emitted(points, include_static: bool = False):
    return [p for p in points if include_static or not p.static]


def emit_json(points, include_static: bool = False) -> str:
    return json.dumps([p.to_dict() for p in emitted(points, include_static)],
                      indent=2)


def emit_text(points, include_static: bool = False) -> str:
    lines = []
    for p in emitted(points, include_static):
        flag = " static" if p.static else ""
        lines.append(f"{p.id}\t{p.hier_name}\t{p.kind}\t{p.span}{flag}")
    return "\n".join(lines)
