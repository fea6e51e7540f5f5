"""Coverpoint extraction: lexer, parser fixed point, extraction rules."""
import argparse
import re

import pytest

from coemu.covergen import (KIND_CASE, KIND_CASE_ARM, KIND_IF, KIND_TERNARY,
                            emit_json, emit_text, emitted, extract,
                            extract_files, main_from_args, parse_source,
                            renumber, to_source, tokenize)
from coemu.dut import COVER_SIGNALS

from conftest import BAD_DIR, CORPUS_DIR, ROOT

import json

MOCK_RTL = ROOT / "rtl" / "dut_selects.sv"

# Hand-counted per corpus file: (if, ternary, case, static, emitted).
CORPUS_COUNTS = {
    "c01_single_ternary.sv": (0, 1, 0, 0, 1),
    "c02_if_chain.sv": (3, 0, 0, 0, 3),
    "c03_nested_if.sv": (4, 0, 0, 0, 4),
    "c04_case.sv": (1, 0, 1, 0, 2),
    "c05_static_mix.sv": (2, 1, 0, 2, 1),
    "c06_port_ternary.sv": (0, 2, 0, 1, 1),
    "c07_two_modules.sv": (1, 2, 1, 0, 4),
    "c08_clocked.sv": (2, 0, 1, 0, 3),
    "c09_expr_zoo.sv": (0, 4, 0, 0, 4),
    "c10_localparam.sv": (2, 1, 0, 2, 1),
    "c11_comments.sv": (0, 1, 0, 0, 1),
    "c12_no_conditions.sv": (0, 0, 0, 0, 0),
}

PICK = """
module pick(input wire s, input wire a, input wire b, output wire o);
  assign o = s ? a : b;
endmodule
"""


def points_of(text, **kw):
    modules, issues = parse_source(text)
    assert issues == []
    return extract(modules, **kw)


def kind_counts(points):
    out = {KIND_IF: 0, KIND_TERNARY: 0, KIND_CASE: 0, KIND_CASE_ARM: 0}
    for p in points:
        out[p.kind] += 1
    return out


# ------------------------------------------------------------------ lexer

def test_lexer_basics():
    toks, issues = tokenize("module m; // line\n/* block\ncomment */ assign x = 4'b1010 ? y : 32'hFF;\nendmodule")
    assert issues == []
    kinds = [(t.kind, t.text) for t in toks]
    assert ("kw", "module") in kinds and ("kw", "endmodule") in kinds
    assert ("number", "4'b1010") in kinds and ("number", "32'hFF") in kinds
    assert ("ident", "x") in kinds
    # comments vanish entirely
    assert not any("comment" in t.text for t in toks)


def test_lexer_tracks_lines_and_columns():
    toks, _ = tokenize("module m;\n  wire w;\nendmodule")
    wire = next(t for t in toks if t.text == "wire")
    assert (wire.span.line, wire.span.col) == (2, 3)


def test_lexer_reports_unknown_characters():
    _, issues = tokenize("module m; assign x = `BAD; endmodule")
    assert len(issues) == 1
    assert "unexpected character" in issues[0].message


# ----------------------------------------------------------- small sources

def test_single_ternary_module():
    pts = points_of(PICK)
    assert len(pts) == 1
    p = pts[0]
    assert p.kind == KIND_TERNARY and not p.static and p.id == 0
    assert re.fullmatch(r"pick\.tern0\.[0-9a-f]{8}", p.hier_name)


def test_if_chain_yields_one_point_per_condition():
    pts = points_of("""
module m(input wire [2:0] r, output reg [1:0] g);
  always_comb begin
    if (r[2]) g = 2'd3;
    else if (r[1]) g = 2'd2;
    else if (r[0]) g = 2'd1;
    else g = 2'd0;
  end
endmodule
""")
    assert [p.kind for p in pts] == [KIND_IF] * 3
    assert [p.hier_name.split(".")[1] for p in pts] == ["if0", "if1", "if2"]


def test_digest_is_whitespace_invariant():
    squeezed = "module pick(input wire s,input wire a,input wire b,output wire o);assign o=s?a:b;endmodule"
    assert [p.hier_name for p in points_of(squeezed)] == \
        [p.hier_name for p in points_of(PICK)]


def test_points_compare_span_free():
    # spans carry location but never participate in equality
    a = points_of(PICK)[0]
    b = points_of("\n\n\n" + PICK)[0]
    assert a.span.line != b.span.line
    assert a == b


def test_static_requires_parameter_only_idents():
    pts = points_of("""
module m #(parameter EN = 1, parameter W = 8)(input wire e, output wire [7:0] q);
  localparam LIM = W * 2;
  assign q = (EN != 0) ? 8'd1 : 8'd0;
  assign q2 = (LIM > 4) ? 8'd1 : 8'd0;
  assign q3 = (e && EN != 0) ? 8'd1 : 8'd0;
endmodule
""")
    assert [p.static for p in pts] == [True, True, False]
    assert len(emitted(pts)) == 1
    assert len(emitted(pts, include_static=True)) == 3


def test_case_and_per_arm_extraction():
    src = """
module m(input wire [1:0] op, input wire z, output reg [3:0] y);
  always_comb begin
    case (op)
      2'd0: y = 4'd1;
      2'd1, 2'd2: y = 4'd2;
      default: if (z) y = 4'd3;
    endcase
  end
endmodule
"""
    base = points_of(src)
    assert kind_counts(base) == {KIND_IF: 1, KIND_TERNARY: 0, KIND_CASE: 1,
                                 KIND_CASE_ARM: 0}
    armed = points_of(src, per_case_arm=True)
    arms = [p for p in armed if p.kind == KIND_CASE_ARM]
    # default arm gets no point; the two-label arm folds into one disjunction
    assert len(arms) == 2
    assert all(re.fullmatch(r"m\.arm\d\.[0-9a-f]{8}", p.hier_name) for p in arms)


def test_extraction_order_is_source_order():
    for name in CORPUS_COUNTS:
        text = (CORPUS_DIR / name).read_text()
        modules, issues = parse_source(text, file=name)
        assert issues == []
        pts = extract(modules)
        assert [p.id for p in pts] == list(range(len(pts)))
        spans = [(p.span.line, p.span.col) for p in pts]
        # pre-order within a module visits header expressions before items,
        # which is exactly ascending source position
        assert spans == sorted(spans)


# ------------------------------------------------------------- the corpus

@pytest.mark.parametrize("name", sorted(CORPUS_COUNTS))
def test_corpus_counts_match_hand_tally(name):
    n_if, n_tern, n_case, n_static, n_emit = CORPUS_COUNTS[name]
    pts, issues = extract_files([CORPUS_DIR / name])
    assert issues == []
    got = kind_counts(pts)
    assert got[KIND_IF] == n_if
    assert got[KIND_TERNARY] == n_tern
    assert got[KIND_CASE] == n_case
    assert sum(1 for p in pts if p.static) == n_static
    assert len(emitted(pts)) == n_emit


@pytest.mark.parametrize("name", sorted(CORPUS_COUNTS))
def test_parse_print_fixed_point(name):
    text = (CORPUS_DIR / name).read_text()
    modules, issues = parse_source(text, file=name)
    assert issues == []
    printed = to_source(modules)
    modules2, issues2 = parse_source(printed, file=name)
    assert issues2 == []
    assert to_source(modules2) == printed
    assert extract(modules2) == extract(modules)


def test_token_scanner_agrees_with_extractor():
    """Independent tally: strip comments, then every `if`, `case`, and
    `?` token is exactly one coverpoint."""
    strip = re.compile(r"//[^\n]*|/\*.*?\*/", re.S)
    for name in CORPUS_COUNTS:
        text = strip.sub(" ", (CORPUS_DIR / name).read_text())
        pts, _ = extract_files([CORPUS_DIR / name])
        got = kind_counts(pts)
        assert got[KIND_IF] == len(re.findall(r"\bif\b", text)), name
        assert got[KIND_CASE] == len(re.findall(r"\bcase\b", text)), name
        assert got[KIND_TERNARY] == text.count("?"), name


def test_ids_run_densely_across_files():
    names = sorted(CORPUS_COUNTS)
    pts, issues = extract_files([CORPUS_DIR / n for n in names])
    assert issues == []
    assert [p.id for p in pts] == list(range(30))
    assert len(emitted(pts)) == 25


def test_renumber():
    pts = points_of(PICK)
    shifted = renumber(pts, 10)
    assert [p.id for p in shifted] == [10]
    assert shifted[0].hier_name == pts[0].hier_name


# ------------------------------------------------------------ the mock RTL

def test_mock_rtl_matches_the_pipeline_bitmap():
    pts, issues = extract_files([MOCK_RTL])
    assert issues == []
    assert len(pts) == 36
    non_static = emitted(pts)
    assert len(non_static) == 34 == len(COVER_SIGNALS)
    assert sum(1 for p in pts if p.static) == 2
    got = kind_counts(non_static)
    assert got == {KIND_IF: 24, KIND_TERNARY: 9, KIND_CASE: 1, KIND_CASE_ARM: 0}


def test_mock_rtl_fixed_point():
    modules, issues = parse_source(MOCK_RTL.read_text(), file=str(MOCK_RTL))
    assert issues == []
    printed = to_source(modules)
    modules2, issues2 = parse_source(printed)
    assert issues2 == [] and to_source(modules2) == printed


# ------------------------------------------------------------ error paths

def test_generate_is_reported_not_crashed():
    _, issues = parse_source((BAD_DIR / "unsupported_generate.sv").read_text(),
                             file="unsupported_generate.sv")
    assert issues
    assert any("generate" in str(i) for i in issues)
    assert all("unsupported_generate.sv:" in str(i) for i in issues)


def test_recovery_keeps_later_points():
    pts, issues = extract_files([BAD_DIR / "broken_syntax.sv"])
    assert issues
    # the second, well-formed module still contributes its point
    assert any(p.hier_name.startswith("ok_after.") for p in pts)


def args_for(files, fmt="text", per_case_arm=False, include_static=False):
    return argparse.Namespace(files=[str(f) for f in files], format=fmt,
                              per_case_arm=per_case_arm,
                              include_static=include_static)


def test_cli_exit_codes_and_json(capsys):
    assert main_from_args(args_for([BAD_DIR / "broken_syntax.sv"])) == 3
    err = capsys.readouterr().err
    assert "expected" in err

    assert main_from_args(args_for([CORPUS_DIR / "c01_single_ternary.sv"],
                                   fmt="json")) == 0
    data = json.loads(capsys.readouterr().out)
    assert len(data) == 1 and data[0]["kind"] == KIND_TERNARY
    assert set(data[0]) == {"id", "hier_name", "kind", "file", "line", "col", "static"}

    assert main_from_args(args_for([CORPUS_DIR / "c12_no_conditions.sv"],
                                   fmt="json")) == 0
    assert json.loads(capsys.readouterr().out) == []

    assert main_from_args(args_for(["/nonexistent.sv"])) == 1


def test_emit_text_shape():
    pts = points_of(PICK)
    line = emit_text(pts)
    assert line.startswith("0\tpick.tern0.")
    assert "\tternary-cond\t" in line
    assert emit_text([]) == ""
    assert json.loads(emit_json([])) == []
