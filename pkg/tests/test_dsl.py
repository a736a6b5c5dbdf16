from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrlab.dsl import DslError, build_instance, format_poly, format_presentation, parse_poly, parse_presentation
from lrlab.field import Field
from lrlab.presets import EXAMPLE1, EXAMPLE2, PRESETS, preset_text

HEAD = "field QQ\nvars x y\nideal x^2 y^2\n"


def error_of(text: str) -> DslError:
    with pytest.raises(DslError) as err:
        parse_presentation(text)
    return err.value


def test_example1_preset_parses():
    pf = parse_presentation(EXAMPLE1)
    assert pf.field == Field.qq()
    assert pf.variables == ("x", "y")
    assert pf.ideal == ((1, 1), (2, 0), (0, 2))
    assert [name for name, _ in pf.derivations] == ["E"]
    assert pf.bracket.kind == "vector_field" and pf.bracket.args == ("E",)
    assert pf.h == ((Fraction(1), (0, 1)),)


def test_example2_preset_parses():
    pf = parse_presentation(EXAMPLE2)
    assert pf.field == Field.gf(2)
    assert pf.variables == ("x", "y", "z")
    assert len(pf.ideal) == 6
    assert [name for name, _ in pf.derivations] == ["E", "F"]
    assert pf.bracket.kind == "jacobi_pair" and pf.bracket.args == ("E", "F")
    assert pf.h == ((1, (0, 2, 0)),)


def test_preset_lookup():
    assert preset_text("example1") == EXAMPLE1
    assert set(PRESETS) == {"example1", "example2"}
    with pytest.raises(KeyError, match="unknown preset"):
        preset_text("example3")


def test_missing_bracket_section():
    e = error_of(HEAD + "der E: x -> y\n")
    assert "missing bracket section" in e.message
    assert e.line == 5


def test_empty_bracket_section():
    e = error_of(HEAD + "bracket\n")
    assert "bracket recipe" in e.message and e.line == 4


@pytest.mark.parametrize("text, fragment, line, column", [
    ("field GF(4)\nvars x\nideal x^2\nbracket table\n", "not a prime field", 1, 10),
    ("field QR\nvars x\nideal x^2\nbracket table\n", "expected 'GF(p)' or 'QQ'", 1, None),
    ("field QQ\nvars x\nideal x^2 2*x\nbracket table\n", "non-monomial", 3, None),
    ("field QQ\nvars x\nideal x^2 + x\nbracket table\n", "non-monomial", 3, None),
    ("field QQ\nvars x\nideal x^2 w\nbracket table\n", "undeclared identifier 'w'", 3, 11),
    ("field QQ\nvars x x\nideal x^2\nbracket table\n", "declared twice", 2, 8),
    ("field QQ\nvars x\nideal 1\nbracket table\n", "contains 1", 3, None),
    ("field QQ\nvars x\nideal\nbracket table\n", "empty ideal", 3, None),
    ("field QQ\nvars x\nideal x^2\nder E: w -> x\nbracket vector_field(E)\n", "undeclared identifier 'w'", 4, 8),
    ("field QQ\nvars x\nideal x^2\nder E: x -> x\nbracket vector_field(F)\n", "undeclared identifier 'F'", 5, 22),
    ("field QQ\nvars x\nideal x^2\nder E: x => x\nbracket vector_field(E)\n", None, 4, None),
    ("field QQ\nvars x\nideal x^2\nbracket lie(E)\n", "unknown bracket recipe", 4, 9),
    ("field QQ\nvars x\nideal x^2\nbracket table\nh = x $ 1\n", "unexpected character", 5, 7),
    ("field QQ\nvars x\nideal x^2\nbracket table\nh = x\nvars y\n", "out of order", 6, 1),
    ("vars x\nfield QQ\n", "field section", 1, 1),
])
def test_diagnostics_carry_position(text, fragment, line, column):
    e = error_of(text)
    if fragment is not None:
        assert fragment in e.message
    assert e.line == line
    if column is not None:
        assert e.column == column
    assert str(e).startswith(f"line {line}")


def test_comments_and_blank_lines_are_ignored():
    text = "# header\n\nfield QQ   # the rationals\nvars x\n\nideal x^3\nder E: x -> x^2\nbracket vector_field(E)\n"
    pf = parse_presentation(text)
    assert pf.ideal == ((3,),)


def test_table_bracket():
    pf = parse_presentation("field QQ\nvars x\nideal x^3\nbracket table\n{1, x} = x^2\n{x, x^2} = 0\n")
    assert pf.bracket.kind == "table"
    assert pf.bracket.entries[0] == (((0,), (1,)), ((Fraction(1), (2,)),))
    inst = build_instance(pf)
    A = inst.algebra
    assert A.format(inst.bracket(A.one, A.parse("x"))) == "x^2"


def test_flags_line():
    pf = parse_presentation(HEAD + "bracket table\nh = 1\nflags slow exact\n")
    assert pf.flags == ("slow", "exact")


def test_polynomial_parsing_and_formatting():
    v = ("x", "y")
    t = parse_poly("3/2*x - 1 + x*y^2 - 1/2*x", v)
    assert t == ((Fraction(-1), (0, 0)), (Fraction(1), (1, 0)), (Fraction(1), (1, 2)))
    assert format_poly(t, v) == "-1 + x + x*y^2"
    assert parse_poly("x - x", v) == ()
    assert format_poly((), v) == "0"
    gf3 = Field.gf(3)
    assert format_poly(parse_poly("2*x + 4*y", v, gf3), v, gf3) == "2*x + y"


def test_coefficients_reduce_in_the_field():
    pf = parse_presentation("field GF(2)\nvars x\nideal x^3\nder E: x -> x + x + x^2\nbracket vector_field(E)\n")
    assert pf.derivations[0][1] == (("x", ((1, (2,)),)),)


@pytest.mark.parametrize("text", [EXAMPLE1, EXAMPLE2, EXAMPLE1.replace("field QQ", "field GF(2)"),
                                  "field GF(5)\nvars u v\nideal u^3 v^2\nder D: u -> 3*u^2 - v, v -> 0\n"
                                  "bracket table\n{1, u} = 2*u\n{u, v} = -u*v\nh = 4 + u\nflags quick\n"])
def test_round_trip(text):
    pf = parse_presentation(text)
    again = parse_presentation(format_presentation(pf))
    assert again == pf
    assert format_presentation(again) == format_presentation(pf)


@st.composite
def presentation_texts(draw):
    p = draw(st.sampled_from([0, 2, 3, 7]))
    field = "QQ" if p == 0 else f"GF({p})"
    coeff = st.integers(-4, 4).map(str) if p == 0 else st.integers(0, p - 1).map(str)
    mono = st.sampled_from(["1", "x", "y", "x*y", "x^2", "y^3", "x^2*y"])
    poly = st.lists(st.tuples(coeff, mono), min_size=1, max_size=3).map(
        lambda ts: " + ".join(f"{c}*{m}" for c, m in ts).replace("+ -", "- "))
    ideal = draw(st.sampled_from(["x^3 y^4", "x^2 y^2 x*y", "x^4 y x^2*y"]))
    lines = [f"field {field}", "vars x y", f"ideal {ideal}", f"der E: x -> {draw(poly)}, y -> {draw(poly)}"]
    recipe = draw(st.sampled_from(["vector_field(E)", "table"]))
    lines.append(f"bracket {recipe}")
    if recipe == "table":
        lines.append(f"{{x, y}} = {draw(poly)}")
    if draw(st.booleans()):
        lines.append(f"h = {draw(poly)}")
    return "\n".join(lines) + "\n"


@settings(max_examples=80, deadline=None)
@given(presentation_texts())
def test_round_trip_property(text):
    pf = parse_presentation(text)
    assert parse_presentation(format_presentation(pf)) == pf
