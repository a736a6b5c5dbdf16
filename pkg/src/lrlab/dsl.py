"""A small line-oriented language for presenting Jacobi algebras.

Example::

    # truncated polynomial ring with a vector-field bracket
    field QQ
    vars x y
    ideal x*y x^2 y^2
    der E: x -> y
    bracket vector_field(E)
    h = y

Declarations appear one per line in the order ``field``, ``vars``, ``ideal``,
any number of ``der`` lines, ``bracket`` (followed by ``{m1, m2} = poly``
lines for a ``table`` bracket), then optional ``h`` and ``flags`` lines.
``#`` starts a comment.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
import re
from typing import Sequence

from .algebra import Algebra, Presentation, build_algebra, derivation_from_images, graded_lex_key, monomial_name
from .field import Field, is_prime
from .jacobi import (JacobiBracket, bracket_from_derivation_pair, bracket_from_table,
                     bracket_from_vector_field)

Terms = tuple[tuple[object, tuple[int, ...]], ...]

_TOKEN = re.compile(r"\s*(?:(?P<arrow>->)|(?P<int>\d+)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<sym>[\^*+\-/(),:={}]))")
_KEYWORDS = ("field", "vars", "ideal", "der", "bracket", "h", "flags")


class DslError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(f"{where}{message}")
        self.message = message
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(text: str, line: int = 1, offset: int = 0) -> list[Token]:
    out = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            col = pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1 + offset
            raise DslError(f"unexpected character {text[col - 1 - offset]!r}", line, col)
        kind = m.lastgroup
        start = m.start(kind)
        out.append(Token(kind, m.group(kind), line, start + 1 + offset))
        pos = m.end()
    return out


class _Cursor:
    def __init__(self, tokens: list[Token], line: int, end_col: int):
        self.tokens = tokens
        self.i = 0
        self.line = line
        self.end_col = end_col

    def peek(self, k: int = 0) -> Token | None:
        j = self.i + k
        return self.tokens[j] if j < len(self.tokens) else None

    def next(self, what: str = "a token") -> Token:
        tok = self.peek()
        if tok is None:
            raise DslError(f"expected {what}, found end of line", self.line, self.end_col)
        self.i += 1
        return tok

    def expect(self, text: str) -> Token:
        tok = self.next(repr(text))
        if tok.text != text:
            raise DslError(f"expected {text!r}, found {tok.text!r}", tok.line, tok.column)
        return tok

    def at_end(self) -> bool:
        return self.i >= len(self.tokens)

    def done(self):
        tok = self.peek()
        if tok is not None:
            raise DslError(f"unexpected {tok.text!r}", tok.line, tok.column)


# -- polynomials ---------------------------------------------------------------

def _parse_monomial(cur: _Cursor, variables: Sequence[str]) -> tuple[int, ...]:
    exps = [0] * len(variables)
    while True:
        tok = cur.next("a variable")
        if tok.kind == "int" and tok.text == "1":
            pass
        elif tok.kind == "ident":
            if tok.text not in variables:
                raise DslError(f"undeclared identifier {tok.text!r}", tok.line, tok.column)
            power = 1
            if cur.peek() is not None and cur.peek().text == "^":
                cur.next()
                p = cur.next("an exponent")
                if p.kind != "int":
                    raise DslError(f"expected an exponent, found {p.text!r}", p.line, p.column)
                power = int(p.text)
            exps[variables.index(tok.text)] += power
        else:
            raise DslError(f"expected a variable, found {tok.text!r}", tok.line, tok.column)
        nxt = cur.peek()
        if nxt is not None and nxt.text == "*":
            cur.next()
            continue
        return tuple(exps)


def _parse_coefficient(cur: _Cursor) -> Fraction:
    tok = cur.next("a number")
    value = Fraction(int(tok.text))
    if cur.peek() is not None and cur.peek().text == "/":
        cur.next()
        den = cur.next("a denominator")
        if den.kind != "int" or int(den.text) == 0:
            raise DslError(f"bad denominator {den.text!r}", den.line, den.column)
        value /= int(den.text)
    return value


def _parse_terms(cur: _Cursor, variables: Sequence[str], stop=(",",)) -> list[tuple[Fraction, tuple[int, ...]]]:
    terms = []
    sign = 1
    first = True
    while True:
        tok = cur.peek()
        if tok is None or tok.text in stop:
            if first:
                raise DslError("expected a polynomial", cur.line, tok.column if tok else cur.end_col)
            raise DslError("dangling sign", cur.line, tok.column if tok else cur.end_col)
        if tok.text in "+-":
            cur.next()
            if tok.text == "-":
                sign = -sign
            continue
        coeff = Fraction(1)
        if tok.kind == "int":
            coeff = _parse_coefficient(cur)
            nxt = cur.peek()
            if nxt is not None and nxt.text == "*":
                cur.next()
                exps = _parse_monomial(cur, variables)
            else:
                exps = (0,) * len(variables)
        else:
            exps = _parse_monomial(cur, variables)
        terms.append((sign * coeff, exps))
        sign = 1
        first = False
        tok = cur.peek()
        if tok is None or tok.text in stop:
            return terms
        if tok.text not in "+-":
            raise DslError(f"expected '+' or '-', found {tok.text!r}", tok.line, tok.column)


def normalize_terms(terms, field: Field | None) -> Terms:
    """Combine like terms, drop zeros, sort by the basis order."""
    acc: dict[tuple[int, ...], object] = {}
    for c, e in terms:
        c = field(c) if field is not None else Fraction(c)
        acc[e] = (field(acc[e] + c) if field is not None else acc[e] + c) if e in acc else c
    return tuple((c, e) for e, c in sorted(acc.items(), key=lambda kv: graded_lex_key(kv[0])) if c != 0)


def parse_poly(text: str, variables: Sequence[str], field: Field | None = None, line: int = 1,
               offset: int = 0) -> Terms:
    """``"x^2*z + 3/2*x - 1"`` -> normalised ``((coeff, exps), ...)``."""
    tokens = tokenize(text, line, offset)
    cur = _Cursor(tokens, line, offset + len(text) + 1)
    terms = _parse_terms(cur, list(variables), stop=())
    cur.done()
    return normalize_terms(terms, field)


def format_poly(terms: Terms, variables: Sequence[str], field: Field | None = None) -> str:
    if not terms:
        return "0"
    parts = []
    for c, e in terms:
        mon = monomial_name(variables, e)
        if field is not None and field.characteristic:
            mag, neg = int(c), False
        else:
            c = Fraction(c)
            mag, neg = abs(c), c < 0
        if mon == "1":
            body = str(mag)
        elif mag == 1:
            body = mon
        else:
            body = f"{mag}*{mon}"
        if not parts:
            parts.append(f"-{body}" if neg else body)
        else:
            parts.append(f"- {body}" if neg else f"+ {body}")
    return " ".join(parts)


# -- presentation files ----------------------------------------------------------

@dataclass(frozen=True)
class Bracket:
    kind: str  # vector_field | jacobi_pair | table
    args: tuple = ()
    entries: tuple = ()  # table: (((exps1, exps2), terms), ...)


@dataclass(frozen=True)
class PresentationFile:
    field: Field
    variables: tuple[str, ...]
    ideal: tuple[tuple[int, ...], ...]
    derivations: tuple[tuple[str, tuple[tuple[str, Terms], ...]], ...]
    bracket: Bracket
    h: Terms | None = None
    flags: tuple[str, ...] = ()

    @property
    def presentation(self) -> Presentation:
        return Presentation(self.field, self.variables, self.ideal)


def _logical_lines(text: str):
    for k, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if line.strip():
            yield k, line


def parse_presentation(text: str) -> PresentationFile:
    lines = list(_logical_lines(text))
    pos = 0
    field = None
    variables: list[str] = []
    ideal = []
    ders = []
    bracket = None
    h = None
    flags: tuple[str, ...] = ()
    last_line = lines[-1][0] if lines else 1

    def header(keyword):
        if pos >= len(lines):
            return None
        k, line = lines[pos]
        m = re.match(r"\s*([A-Za-z_]+)", line)
        word = m.group(1) if m else None
        return (k, line, word) if word == keyword else None

    def require(keyword, what):
        got = header(keyword)
        if got is None:
            if pos >= len(lines):
                raise DslError(f"missing {what} section", last_line + 1, 1)
            k, line = lines[pos]
            word = line.split(None, 1)[0]
            raise DslError(f"expected {what} section ('{keyword} ...'), found {word!r}", k, 1)
        return got

    # field
    k, line, _ = require("field", "field")
    body = line.strip()[len("field"):]
    off = line.index("field") + len("field")
    m = re.fullmatch(r"\s*(?:GF\(\s*(\d+)\s*\)|QQ)\s*", body)
    if not m:
        raise DslError(f"expected 'GF(p)' or 'QQ', found {body.strip()!r}", k, off + 2)
    if m.group(1) is not None:
        p = int(m.group(1))
        if not is_prime(p):
            raise DslError(f"GF({p}) is not a prime field: {p} is not prime", k, off + body.index(m.group(1)) + 1)
        field = Field.gf(p)
    else:
        field = Field.qq()
    pos += 1

    # vars
    k, line, _ = require("vars", "vars")
    off = line.index("vars") + 4
    toks = tokenize(line[off:], k, off)
    for t in toks:
        if t.kind != "ident" or t.text in _KEYWORDS:
            raise DslError(f"bad variable name {t.text!r}", t.line, t.column)
        if t.text in variables:
            raise DslError(f"variable {t.text!r} declared twice", t.line, t.column)
        variables.append(t.text)
    pos += 1

    # ideal
    k, line, _ = require("ideal", "ideal")
    off = line.index("ideal") + 5
    cur = _Cursor(tokenize(line[off:], k, off), k, len(line) + 1)
    while not cur.at_end():
        tok = cur.peek()
        if tok.text == ",":
            cur.next()
            continue
        if tok.kind == "int" and tok.text != "1":
            raise DslError("non-monomial ideal generator: coefficients are not allowed", tok.line, tok.column)
        start = tok
        exps = _parse_monomial(cur, variables)
        nxt = cur.peek()
        if nxt is not None and nxt.text in "+-/^":
            raise DslError("non-monomial ideal generator", nxt.line, nxt.column)
        if not any(exps):
            raise DslError("the ideal contains 1", start.line, start.column)
        ideal.append(exps)
    if not ideal and variables:
        raise DslError("empty ideal: the quotient would be infinite-dimensional", k, off + 1)
    pos += 1

    # derivations
    der_names = []
    while (got := header("der")) is not None:
        k, line, _ = got
        off = line.index("der") + 3
        cur = _Cursor(tokenize(line[off:], k, off), k, len(line) + 1)
        name = cur.next("a derivation name")
        if name.kind != "ident":
            raise DslError(f"bad derivation name {name.text!r}", name.line, name.column)
        if name.text in der_names:
            raise DslError(f"derivation {name.text!r} declared twice", name.line, name.column)
        cur.expect(":")
        images = []
        while True:
            v = cur.next("a variable")
            if v.kind != "ident" or v.text not in variables:
                raise DslError(f"undeclared identifier {v.text!r}", v.line, v.column)
            if v.text in [x for x, _ in images]:
                raise DslError(f"image of {v.text!r} given twice", v.line, v.column)
            arrow = cur.next("'->'")
            if arrow.text != "->":
                raise DslError(f"expected '->', found {arrow.text!r}", arrow.line, arrow.column)
            terms = normalize_terms(_parse_terms(cur, variables, stop=(",",)), field)
            images.append((v.text, terms))
            if cur.at_end():
                break
            cur.expect(",")
        der_names.append(name.text)
        ders.append((name.text, tuple(images)))
        pos += 1

    # bracket
    k, line, _ = require("bracket", "bracket")
    off = line.index("bracket") + 7
    cur = _Cursor(tokenize(line[off:], k, off), k, len(line) + 1)
    kind = cur.next("a bracket recipe")
    if kind.text in ("vector_field", "jacobi_pair"):
        cur.expect("(")
        args = []
        want = 1 if kind.text == "vector_field" else 2
        for i in range(want):
            if i:
                cur.expect(",")
            a = cur.next("a derivation name")
            if a.text not in der_names:
                raise DslError(f"undeclared identifier {a.text!r}", a.line, a.column)
            args.append(a.text)
        cur.expect(")")
        cur.done()
        bracket = Bracket(kind.text, tuple(args))
        pos += 1
    elif kind.text == "table":
        cur.done()
        pos += 1
        entries = []
        while pos < len(lines) and lines[pos][1].lstrip().startswith("{"):
            k, line = lines[pos]
            cur = _Cursor(tokenize(line, k), k, len(line) + 1)
            cur.expect("{")
            m1 = _parse_monomial(cur, variables)
            cur.expect(",")
            m2 = _parse_monomial(cur, variables)
            cur.expect("}")
            cur.expect("=")
            terms = normalize_terms(_parse_terms(cur, variables, stop=()), field)
            entries.append(((m1, m2), terms))
            pos += 1
        bracket = Bracket("table", (), tuple(entries))
    else:
        raise DslError(f"unknown bracket recipe {kind.text!r} (expected vector_field, jacobi_pair or table)",
                       kind.line, kind.column)

    # h
    if (got := header("h")) is not None:
        k, line, _ = got
        off = line.index("h") + 1
        rest = line[off:]
        eq = rest.find("=")
        if eq < 0 or rest[:eq].strip():
            raise DslError("expected 'h = polynomial'", k, off + 1)
        h = parse_poly(rest[eq + 1:], variables, field, line=k, offset=off + eq + 1)
        pos += 1

    if (got := header("flags")) is not None:
        k, line, _ = got
        flags = tuple(line.split()[1:])
        pos += 1

    if pos < len(lines):
        k, line = lines[pos]
        word = line.split(None, 1)[0]
        if word in _KEYWORDS:
            raise DslError(f"'{word}' is out of order or repeated", k, line.index(word) + 1)
        raise DslError(f"unexpected {word!r}", k, line.index(word) + 1)
    return PresentationFile(field, tuple(variables), tuple(ideal), tuple(ders), bracket, h, flags)


def format_presentation(pf: PresentationFile) -> str:
    v = pf.variables
    f = pf.field
    out = [f"field {f}", "vars " + " ".join(v), "ideal " + " ".join(monomial_name(v, e) for e in pf.ideal)]
    for name, images in pf.derivations:
        out.append(f"der {name}: " + ", ".join(f"{x} -> {format_poly(t, v, f)}" for x, t in images))
    b = pf.bracket
    if b.kind == "table":
        out.append("bracket table")
        for (m1, m2), t in b.entries:
            out.append(f"{{{monomial_name(v, m1)}, {monomial_name(v, m2)}}} = {format_poly(t, v, f)}")
    else:
        out.append(f"bracket {b.kind}({', '.join(b.args)})")
    if pf.h is not None:
        out.append(f"h = {format_poly(pf.h, v, f)}")
    if pf.flags:
        out.append("flags " + " ".join(pf.flags))
    return "\n".join(out) + "\n"


# -- instantiation ---------------------------------------------------------------

@dataclass
class Instance:
    source: PresentationFile
    algebra: Algebra
    derivations: dict
    bracket: JacobiBracket
    h: object | None


def build_instance(pf: PresentationFile) -> Instance:
    A = build_algebra(pf.presentation)
    ders = {}
    for name, images in pf.derivations:
        ders[name] = derivation_from_images(A, {x: A.from_poly(t) for x, t in images})
    b = pf.bracket
    if b.kind == "vector_field":
        J = bracket_from_vector_field(ders[b.args[0]])
    elif b.kind == "jacobi_pair":
        J = bracket_from_derivation_pair(ders[b.args[0]], ders[b.args[1]])
    else:
        entries = {}
        for (m1, m2), t in b.entries:
            i, j = A.index_of(m1), A.index_of(m2)
            if i is None or j is None:
                raise DslError(f"{{{monomial_name(A.variables, m1)}, {monomial_name(A.variables, m2)}}}: "
                               "both arguments must be standard monomials")
            entries[(i, j)] = A.from_poly(t)
        J = bracket_from_table(A, entries)
    h = A.from_poly(pf.h) if pf.h is not None else None
    return Instance(pf, A, ders, J, h)
