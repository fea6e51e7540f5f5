"""Tokenizer for the SystemVerilog subset.

Produces a flat token list with line/column spans.  Comments and
whitespace vanish here, which is what makes the extractor's output
whitespace-invariant for free.  Constructs outside the subset that we
can name (generate, interface, ...) are lexed as ordinary keywords so
the parser can reject them with a span instead of a generic error.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

KEYWORDS = frozenset("""
    module endmodule input output inout wire reg logic signed
    assign always always_comb always_ff begin end
    if else case endcase default posedge negedge or
    parameter localparam
""".split())

# Recognized so the parser can give a named unsupported-construct error.
UNSUPPORTED = frozenset("""
    generate endgenerate genvar interface endinterface class endclass
    function endfunction task endtask initial final for while repeat
    forever struct union typedef enum package endpackage import export
    modport program endprogram covergroup endgroup property endproperty
""".split())

_MASTER = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<lcomment>//[^\n]*)
    | (?P<bcomment>/\*.*?\*/)
    | (?P<number>(?:\d[\d_]*)?'\s*[sS]?[bBoOdDhH][0-9a-fA-F_xXzZ?]+|\d[\d_]*)
    | (?P<ident>[A-Za-z_$][A-Za-z0-9_$]*)
    | (?P<op><<<|>>>|===|!==|==|!=|<=|>=|&&|\|\||<<|>>|[-+*/%<>!~&|^()\[\]{};:,.?=@\#])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Span:
    file: str = field(compare=False, default="<input>")
    line: int = field(compare=False, default=0)
    col: int = field(compare=False, default=0)

    def __str__(self):
        return f"{self.file}:{self.line}:{self.col}"


@dataclass(frozen=True)
class Token:
    kind: str            # "kw", "ident", "number", "op", "eof"
    text: str
    span: Span

    def is_op(self, text: str) -> bool:
        return self.kind == "op" and self.text == text

    def is_kw(self, text: str) -> bool:
        return self.kind == "kw" and self.text == text


@dataclass(frozen=True)
class LexIssue:
    span: Span
    message: str

    def __str__(self):
        return f"{self.span}: {self.message}"


def tokenize(text: str, file: str = "<input>") -> tuple[list[Token], list[LexIssue]]:
    tokens: list[Token] = []
    issues: list[LexIssue] = []
    pos = 0
    line = 1
    col = 1
    n = len(text)
    while pos < n:
        m = _MASTER.match(text, pos)
        if m is None:
            issues.append(LexIssue(Span(file, line, col),
                                   f"unexpected character {text[pos]!r}"))
            pos += 1
            col += 1
            continue
        lexeme = m.group(0)
        kind = m.lastgroup
        span = Span(file, line, col)
        if kind == "ident":
            word = lexeme
            if word in KEYWORDS or word in UNSUPPORTED:
                tokens.append(Token("kw", word, span))
            else:
                tokens.append(Token("ident", word, span))
        elif kind == "number":
            tokens.append(Token("number", lexeme, span))
        elif kind == "op":
            tokens.append(Token("op", lexeme, span))
        # ws and comments drop
        nl = lexeme.count("\n")
        if nl:
            line += nl
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        pos = m.end()
    tokens.append(Token("eof", "", Span(file, line, col)))
    return tokens, issues
