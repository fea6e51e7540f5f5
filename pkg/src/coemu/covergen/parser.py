"""Recursive-descent parser for the SystemVerilog subset.

Errors don't abort the file: each one is recorded with its span and
parsing resumes at the next ';' (or the enclosing endmodule), so a
single bad item costs one diagnostic, not the rest of the file.
Constructs we recognize but don't support (generate, interface, class,
function, ...) get a named unsupported-construct error.
"""

from __future__ import annotations

from dataclasses import dataclass

from .lexer import UNSUPPORTED, Span, Token, tokenize
from .nodes import (Always, Assign, Begin, Binary, BlockAssign, Case, CaseArm,
                    Concat, Decl, EmptyStmt, Ident, If, Module, Num, Param,
                    Port, Range, Select, Ternary, Unary)


@dataclass(frozen=True)
class SyntaxIssue:
    span: Span
    message: str

    def __str__(self):
        return f"{self.span}: {self.message}"


class _Bail(Exception):
    """Internal: unwind to the nearest recovery point."""


_BIN_LEVELS = (
    ("||",),
    ("&&",),
    ("|",),
    ("^",),
    ("&",),
    ("==", "!=", "===", "!=="),
    ("<", "<=", ">", ">="),
    ("<<", ">>", "<<<", ">>>"),
    ("+", "-"),
    ("*", "/", "%"),
)

_UNARY_OPS = ("!", "~", "-", "+", "&", "|", "^")

_NET_KINDS = ("wire", "reg", "logic")


class Parser:
    def __init__(self, tokens: list[Token], issues=None):
        self.toks = tokens
        self.i = 0
        self.issues: list[SyntaxIssue] = issues if issues is not None else []

    # ------------------------------------------------------------ plumbing

    def peek(self) -> Token:
        return self.toks[self.i]

    def advance(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at_op(self, text: str) -> bool:
        return self.peek().is_op(text)

    def at_kw(self, word: str) -> bool:
        return self.peek().is_kw(word)

    def accept_op(self, text: str) -> bool:
        if self.at_op(text):
            self.i += 1
            return True
        return False

    def accept_kw(self, word: str) -> bool:
        if self.at_kw(word):
            self.i += 1
            return True
        return False

    def _fail(self, message: str):
        self.issues.append(SyntaxIssue(self.peek().span, message))
        raise _Bail()

    def expect_op(self, text: str) -> Token:
        if not self.at_op(text):
            self._fail(f"expected {text!r}, found {self.peek().text!r}")
        return self.advance()

    def expect_kw(self, word: str) -> Token:
        if not self.at_kw(word):
            self._fail(f"expected {word!r}, found {self.peek().text!r}")
        return self.advance()

    def expect_ident(self) -> Token:
        t = self.peek()
        if t.kind != "ident":
            self._fail(f"expected an identifier, found {t.text!r}")
        return self.advance()

    def _check_supported(self) -> None:
        t = self.peek()
        if t.kind == "kw" and t.text in UNSUPPORTED:
            self.issues.append(SyntaxIssue(
                t.span, f"unsupported construct {t.text!r}"))
            self.advance()
            raise _Bail()

    def _sync_item(self) -> None:
        """Skip to just past the next ';', or stop before endmodule/end."""
        while True:
            t = self.peek()
            if t.kind == "eof":
                return
            if t.is_kw("endmodule") or t.is_kw("end"):
                return
            self.advance()
            if t.is_op(";"):
                return

    # ------------------------------------------------------------- source

    def parse_source(self) -> list[Module]:
        modules = []
        while self.peek().kind != "eof":
            if self.at_kw("module"):
                m = self.parse_module()
                if m is not None:
                    modules.append(m)
            else:
                try:
                    self._check_supported()
                    self.issues.append(SyntaxIssue(
                        self.peek().span,
                        f"expected 'module', found {self.peek().text!r}"))
                    self.advance()
                except _Bail:
                    pass
                # resync to the next module header
                while self.peek().kind != "eof" and not self.at_kw("module"):
                    self.advance()
        return modules

    def parse_module(self) -> Module | None:
        t0 = self.expect_kw("module")
        try:
            name = self.expect_ident().text
            params = []
            if self.accept_op("#"):
                self.expect_op("(")
                params = self._parse_param_list()
                self.expect_op(")")
            ports = []
            if self.accept_op("("):
                if not self.at_op(")"):
                    ports = self._parse_port_list()
                self.expect_op(")")
            self.expect_op(";")
        except _Bail:
            self._sync_to_endmodule()
            return None
        items = []
        while True:
            if self.at_kw("endmodule"):
                self.advance()
                break
            if self.peek().kind == "eof":
                self.issues.append(SyntaxIssue(
                    self.peek().span, "unexpected end of file inside module"))
                break
            mark = self.i
            try:
                items.append(self.parse_item())
            except _Bail:
                self._sync_item()
                # a stray token _sync_item refuses to eat (a lone 'end',
                # say) would repeat the same bail forever
                if self.i == mark:
                    self.advance()
        return Module(name, tuple(params), tuple(ports), tuple(items), t0.span)

    def _sync_to_endmodule(self) -> None:
        while self.peek().kind != "eof" and not self.at_kw("endmodule"):
            self.advance()
        self.accept_kw("endmodule")

    def _parse_param_list(self) -> list[Param]:
        out = []
        while True:
            t0 = self.expect_kw("parameter")
            name = self.expect_ident().text
            self.expect_op("=")
            out.append(Param(name, self.parse_expr(), False, t0.span))
            if not self.accept_op(","):
                return out

    def _parse_port_list(self) -> list[Port]:
        out = []
        while True:
            t = self.peek()
            if t.kind != "kw" or t.text not in ("input", "output", "inout"):
                self._fail("expected a port direction")
            direction = self.advance().text
            net = None
            if self.peek().kind == "kw" and self.peek().text in _NET_KINDS:
                net = self.advance().text
            self.accept_kw("signed")
            rng = self._parse_range() if self.at_op("[") else None
            name = self.expect_ident().text
            out.append(Port(direction, net, rng, name, t.span))
            if not self.accept_op(","):
                return out

    def _parse_range(self) -> Range:
        t0 = self.expect_op("[")
        msb = self.parse_expr()
        self.expect_op(":")
        lsb = self.parse_expr()
        self.expect_op("]")
        return Range(msb, lsb, t0.span)

    # -------------------------------------------------------------- items

    def parse_item(self):
        self._check_supported()
        t = self.peek()
        if t.kind == "kw" and t.text in _NET_KINDS:
            return self._parse_decl()
        if t.is_kw("parameter") or t.is_kw("localparam"):
            local = t.text == "localparam"
            self.advance()
            name = self.expect_ident().text
            self.expect_op("=")
            value = self.parse_expr()
            self.expect_op(";")
            return Param(name, value, local, t.span)
        if t.is_kw("assign"):
            self.advance()
            lhs = self._parse_lvalue()
            self.expect_op("=")
            rhs = self.parse_expr()
            self.expect_op(";")
            return Assign(lhs, rhs, t.span)
        if t.is_kw("always") or t.is_kw("always_ff") or t.is_kw("always_comb"):
            return self._parse_always()
        self._fail(f"expected a module item, found {t.text!r}")

    def _parse_decl(self) -> Decl:
        t0 = self.advance()
        self.accept_kw("signed")
        rng = self._parse_range() if self.at_op("[") else None
        names = [self.expect_ident().text]
        while self.accept_op(","):
            names.append(self.expect_ident().text)
        self.expect_op(";")
        return Decl(t0.text, rng, tuple(names), t0.span)

    def _parse_always(self) -> Always:
        t0 = self.advance()
        comb = t0.text == "always_comb"
        ff = t0.text == "always_ff"
        senses = None
        if not comb:
            self.expect_op("@")
            self.expect_op("(")
            if self.accept_op("*"):
                senses = None
            else:
                senses = []
                while True:
                    edge = ""
                    if self.at_kw("posedge") or self.at_kw("negedge"):
                        edge = self.advance().text
                    senses.append((edge, self.expect_ident().text))
                    if not (self.accept_kw("or") or self.accept_op(",")):
                        break
                senses = tuple(senses)
            self.expect_op(")")
        body = self.parse_stmt()
        return Always(senses, body, ff, comb, t0.span)

    # --------------------------------------------------------- statements

    def parse_stmt(self):
        self._check_supported()
        t = self.peek()
        if t.is_kw("begin"):
            self.advance()
            stmts = []
            while not self.at_kw("end"):
                if self.peek().kind == "eof":
                    self._fail("unexpected end of file inside begin/end")
                try:
                    stmts.append(self.parse_stmt())
                except _Bail:
                    self._sync_item()
                    if self.at_kw("endmodule"):
                        raise
            self.advance()
            return Begin(tuple(stmts), t.span)
        if t.is_kw("if"):
            self.advance()
            self.expect_op("(")
            cond = self.parse_expr()
            self.expect_op(")")
            then = self.parse_stmt()
            els = None
            if self.accept_kw("else"):
                els = self.parse_stmt()
            return If(cond, then, els, t.span)
        if t.is_kw("case"):
            self.advance()
            self.expect_op("(")
            select = self.parse_expr()
            self.expect_op(")")
            arms = []
            while not self.accept_kw("endcase"):
                if self.peek().kind == "eof":
                    self._fail("unexpected end of file inside case")
                arms.append(self._parse_case_arm())
            return Case(select, tuple(arms), t.span)
        if t.is_op(";"):
            self.advance()
            return EmptyStmt(t.span)
        # blocking or nonblocking assignment
        lhs = self._parse_lvalue()
        if self.accept_op("<="):
            nb = True
        else:
            self.expect_op("=")
            nb = False
        rhs = self.parse_expr()
        self.expect_op(";")
        return BlockAssign(lhs, rhs, nb, t.span)

    def _parse_case_arm(self) -> CaseArm:
        t = self.peek()
        if self.accept_kw("default"):
            self.expect_op(":")
            return CaseArm(None, self.parse_stmt(), t.span)
        labels = [self.parse_expr()]
        while self.accept_op(","):
            labels.append(self.parse_expr())
        self.expect_op(":")
        return CaseArm(tuple(labels), self.parse_stmt(), t.span)

    # -------------------------------------------------------- expressions

    def parse_expr(self):
        cond = self._parse_binary(0)
        if self.at_op("?"):
            self.advance()
            if_true = self.parse_expr()
            self.expect_op(":")
            if_false = self.parse_expr()
            return Ternary(cond, if_true, if_false, cond.span)
        return cond

    def _parse_lvalue(self):
        t = self.peek()
        if t.kind == "ident" or t.is_op("{"):
            return self._parse_postfix()
        self._fail(f"expected an assignment target, found {t.text!r}")

    def _parse_binary(self, level: int):
        if level >= len(_BIN_LEVELS):
            return self._parse_unary()
        ops = _BIN_LEVELS[level]
        left = self._parse_binary(level + 1)
        while self.peek().kind == "op" and self.peek().text in ops:
            op = self.advance().text
            right = self._parse_binary(level + 1)
            left = Binary(op, left, right, left.span)
        return left

    def _parse_unary(self):
        t = self.peek()
        if t.kind == "op" and t.text in _UNARY_OPS:
            self.advance()
            return Unary(t.text, self._parse_unary(), t.span)
        return self._parse_postfix()

    def _parse_postfix(self):
        node = self._parse_primary()
        while self.at_op("["):
            self.advance()
            msb = self.parse_expr()
            lsb = None
            if self.accept_op(":"):
                lsb = self.parse_expr()
            self.expect_op("]")
            node = Select(node, msb, lsb, node.span)
        return node

    def _parse_primary(self):
        self._check_supported()
        t = self.peek()
        if t.kind == "number":
            self.advance()
            return Num(t.text, t.span)
        if t.kind == "ident":
            self.advance()
            return Ident(t.text, t.span)
        if t.is_op("("):
            self.advance()
            inner = self.parse_expr()
            self.expect_op(")")
            return inner
        if t.is_op("{"):
            self.advance()
            parts = [self.parse_expr()]
            if self.at_op("{"):
                self._fail("replication is not supported")
            while self.accept_op(","):
                parts.append(self.parse_expr())
            self.expect_op("}")
            return Concat(tuple(parts), t.span)
        self._fail(f"expected an expression, found {t.text!r}")


def parse_source(text: str, file: str = "<input>") -> tuple[list[Module], list[SyntaxIssue]]:
    """Parse a source string; returns (modules, issues).

    Every lex and parse problem lands in `issues`; modules that parsed
    cleanly are returned even when other parts of the file did not.
    """
    tokens, lex_issues = tokenize(text, file)
    issues = [SyntaxIssue(li.span, li.message) for li in lex_issues]
    parser = Parser(tokens, issues)
    modules = parser.parse_source()
    return modules, issues
