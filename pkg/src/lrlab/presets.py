"""Built-in presentations with the answers they are known to produce."""

from __future__ import annotations

from dataclasses import dataclass

EXAMPLE1 = """\
# truncated polynomial ring in two variables, bracket from the vector field E
field QQ
vars x y
ideal x*y x^2 y^2
der E: x -> y
bracket vector_field(E)
h = y
"""

EXAMPLE1_GF2 = EXAMPLE1.replace("field QQ", "field GF(2)")

EXAMPLE2 = """\
# three variables over GF(2), bracket from the derivation pair (E, F)
field GF(2)
vars x y z
ideal x^4 y^6 z^2 x*y^4 x^3*y x^3*z
der E: x -> x^2, z -> x^2
der F: y -> z
bracket jacobi_pair(E, F)
h = y^2
"""


@dataclass(frozen=True)
class Expectation:
    dims: dict
    ah_answer: str
    ah_connection_exists: bool
    ah_certificate: str
    jet_answer: str = "yes"


PRESETS = {
    "example1": (EXAMPLE1, Expectation({"A": 3, "Ann": 2, "AhA": 3}, "no", False, "existence-2a")),
    "example2": (EXAMPLE2, Expectation({"A": 29, "Ann": 13, "H": 21}, "no", True, "flatness-2b")),
}


def preset_text(name: str) -> str:
    try:
        return PRESETS[name][0]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}") from None
