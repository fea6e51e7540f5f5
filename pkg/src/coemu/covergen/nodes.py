"""AST for the SystemVerilog subset, with a canonical printer.

Every node carries a source span, but spans never take part in
equality: two parses are the same tree if their structure and token
texts agree.  `to_source` prints a canonical rendering (fixed layout,
fully parenthesized expressions) chosen so parse(print(tree)) == tree;
number literals keep their original spelling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .lexer import Span


def _sp() -> Span:
    return Span()


# ------------------------------------------------------------- expressions

@dataclass(frozen=True)
class Num:
    text: str
    span: Span = field(compare=False, default_factory=_sp)

    def to_source(self) -> str:
        return self.text


@dataclass(frozen=True)
class Ident:
    name: str
    span: Span = field(compare=False, default_factory=_sp)

    def to_source(self) -> str:
        return self.name


@dataclass(frozen=True)
class Unary:
    op: str
    operand: object
    span: Span = field(compare=False, default_factory=_sp)

    def to_source(self) -> str:
        return f"({self.op}{self.operand.to_source()})"


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object
    span: Span = field(compare=False, default_factory=_sp)

    def to_source(self) -> str:
        return f"({self.left.to_source()} {self.op} {self.right.to_source()})"


@dataclass(frozen=True)
class Ternary:
    cond: object
    if_true: object
    if_false: object
    span: Span = field(compare=False, default_factory=_sp)

    def to_source(self) -> str:
        return (f"({self.cond.to_source()} ? {self.if_true.to_source()}"
                f" : {self.if_false.to_source()})")


@dataclass(frozen=True)
class Select:
    """Bit select base[msb] or part select base[msb:lsb]."""
    base: object
    msb: object
    lsb: object | None
    span: Span = field(compare=False, default_factory=_sp)

    def to_source(self) -> str:
        if self.lsb is None:
            return f"{self.base.to_source()}[{self.msb.to_source()}]"
        return f"{self.base.to_source()}[{self.msb.to_source()}:{self.lsb.to_source()}]"


@dataclass(frozen=True)
class Concat:
    parts: tuple
    span: Span = field(compare=False, default_factory=_sp)

    def to_source(self) -> str:
        return "{" + ", ".join(p.to_source() for p in self.parts) + "}"


# -------------------------------------------------------------- statements

@dataclass(frozen=True)
class Begin:
    stmts: tuple
    span: Span = field(compare=False, default_factory=_sp)


@dataclass(frozen=True)
class If:
    cond: object
    then: object
    els: object | None
    span: Span = field(compare=False, default_factory=_sp)


@dataclass(frozen=True)
class CaseArm:
    labels: tuple | None        # None for default
    body: object
    span: Span = field(compare=False, default_factory=_sp)


@dataclass(frozen=True)
class Case:
    select: object
    arms: tuple
    span: Span = field(compare=False, default_factory=_sp)


@dataclass(frozen=True)
class BlockAssign:
    lhs: object
    rhs: object
    nonblocking: bool
    span: Span = field(compare=False, default_factory=_sp)


@dataclass(frozen=True)
class EmptyStmt:
    span: Span = field(compare=False, default_factory=_sp)


# ------------------------------------------------------------ module items

@dataclass(frozen=True)
class Range:
    msb: object
    lsb: object
    span: Span = field(compare=False, default_factory=_sp)

    def to_source(self) -> str:
        return f"[{self.msb.to_source()}:{self.lsb.to_source()}]"


@dataclass(frozen=True)
class Param:
    name: str
    value: object
    local: bool
    span: Span = field(compare=False, default_factory=_sp)


@dataclass(frozen=True)
class Port:
    direction: str              # "input" | "output" | "inout"
    net: str | None             # "wire" | "reg" | "logic" | None
    range: Range | None
    name: str
    span: Span = field(compare=False, default_factory=_sp)


@dataclass(frozen=True)
class Decl:
    net: str                    # "wire" | "reg" | "logic"
    range: Range | None
    names: tuple
    span: Span = field(compare=False, default_factory=_sp)


@dataclass(frozen=True)
class Assign:
    lhs: object
    rhs: object
    span: Span = field(compare=False, default_factory=_sp)


@dataclass(frozen=True)
class Always:
    senses: tuple | None        # None = @(*) or always_comb; else ((edge, name), ...)
    body: object
    ff: bool                    # spelled always_ff
    comb: bool                  # spelled always_comb
    span: Span = field(compare=False, default_factory=_sp)


@dataclass(frozen=True)
class Module:
    name: str
    params: tuple
    ports: tuple
    items: tuple
    span: Span = field(compare=False, default_factory=_sp)


# ---------------------------------------------------------------- printer

_INDENT = "  "


def _stmt_lines(s, depth: int) -> list[str]:
    pad = _INDENT * depth
    if isinstance(s, Begin):
        out = [pad + "begin"]
        for child in s.stmts:
            out.extend(_stmt_lines(child, depth + 1))
        out.append(pad + "end")
        return out
    if isinstance(s, If):
        out = [pad + f"if ({s.cond.to_source()})"]
        out.extend(_stmt_lines(s.then, depth + 1))
        if s.els is not None:
            if isinstance(s.els, If):
                nested = _stmt_lines(s.els, depth)
                out.append(pad + "else " + nested[0].strip())
                out.extend(nested[1:])
            else:
                out.append(pad + "else")
                out.extend(_stmt_lines(s.els, depth + 1))
        return out
    if isinstance(s, Case):
        out = [pad + f"case ({s.select.to_source()})"]
        for arm in s.arms:
            if arm.labels is None:
                head = "default"
            else:
                head = ", ".join(l.to_source() for l in arm.labels)
            out.append(pad + _INDENT + head + ":")
            out.extend(_stmt_lines(arm.body, depth + 2))
        out.append(pad + "endcase")
        return out
    if isinstance(s, BlockAssign):
        op = "<=" if s.nonblocking else "="
        return [pad + f"{s.lhs.to_source()} {op} {s.rhs.to_source()};"]
    if isinstance(s, EmptyStmt):
        return [pad + ";"]
    raise TypeError(f"not a statement: {s!r}")


def _item_lines(item, depth: int) -> list[str]:
    pad = _INDENT * depth
    if isinstance(item, Decl):
        r = f" {item.range.to_source()}" if item.range else ""
        return [pad + f"{item.net}{r} " + ", ".join(item.names) + ";"]
    if isinstance(item, Param):
        kw = "localparam" if item.local else "parameter"
        return [pad + f"{kw} {item.name} = {item.value.to_source()};"]
    if isinstance(item, Assign):
        return [pad + f"assign {item.lhs.to_source()} = {item.rhs.to_source()};"]
    if isinstance(item, Always):
        if item.comb:
            head = "always_comb"
        else:
            kw = "always_ff" if item.ff else "always"
            if item.senses is None:
                head = f"{kw} @(*)"
            else:
                senses = " or ".join(
                    (f"{edge} {name}" if edge else name)
                    for edge, name in item.senses)
                head = f"{kw} @({senses})"
        out = [pad + head]
        out.extend(_stmt_lines(item.body, depth + 1))
        return out
    raise TypeError(f"not a module item: {item!r}")


def module_to_source(m: Module) -> str:
    lines = []
    head = f"module {m.name}"
    if m.params:
        lines.append(head + " #(")
        for i, p in enumerate(m.params):
            comma = "," if i + 1 < len(m.params) else ""
            lines.append(_INDENT + f"parameter {p.name} = {p.value.to_source()}{comma}")
        head = ")"
    if m.ports:
        lines.append(head + " (")
        for i, port in enumerate(m.ports):
            comma = "," if i + 1 < len(m.ports) else ""
            net = f" {port.net}" if port.net else ""
            r = f" {port.range.to_source()}" if port.range else ""
            lines.append(_INDENT + f"{port.direction}{net}{r} {port.name}{comma}")
        lines.append(");")
    else:
        lines.append(head + ";")
    for item in m.items:
        lines.extend(_item_lines(item, 1))
    lines.append("endmodule")
    return "\n".join(lines)


def to_source(modules) -> str:
    """Canonical text for a parsed source: the print half of the
    parse-print fixed point."""
    return "\n\n".join(module_to_source(m) for m in modules) + "\n"
