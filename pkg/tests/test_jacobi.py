from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import instance
from lrlab.algebra import derivation_from_images, leibniz_defects, zero_derivation
from lrlab.jacobi import (
    UnverifiedBracket,
    bracket_from_derivation_pair,
    bracket_from_table,
    bracket_from_vector_field,
    hamiltonian,
    is_poisson,
    verify_hamiltonian_hom,
    verify_jacobi,
)

# A derivation pair whose bracket breaks the Jacobi identity; found by exhaustive
# search over GF(2) presentations of dimension at most 5.
NOT_JACOBI = """\
field GF(2)
vars x y
ideal x^2 y^2
der E: y -> 1
der F: x -> y
bracket jacobi_pair(E, F)
"""


def oracle_bracket(inst):
    A = inst.algebra
    nv = len(A.variables)
    Q = oracles.Quotient(nv, A.ideal, A.field.p)

    def der(D):
        return Q.derivation([oracles.from_vec(A, D(A.monomial(tuple(int(i == k) for i in range(nv)))))
                             for k in range(nv)])

    recipe = inst.source.bracket
    if recipe.kind == "vector_field":
        return Q, oracles.vector_field_bracket(Q, der(inst.derivations[recipe.args[0]]))
    E, F = (der(inst.derivations[a]) for a in recipe.args)
    return Q, oracles.pair_bracket(Q, E, F)


def test_vector_field_values(ex1):
    A, J = ex1.algebra, ex1.bracket
    assert A.format(J(A.one, A.parse("x"))) == "y"
    assert A.field.is_zero(J(A.parse("x"), A.parse("y")))
    assert A.format(J(A.parse("x"), A.one)) == "-y"


def test_zero_vector_field_gives_zero_bracket(ex1):
    J = bracket_from_vector_field(zero_derivation(ex1.algebra))
    assert ex1.algebra.field.is_zero(J.table)
    assert is_poisson(J)


def test_pair_bracket_values(ex2):
    A, J = ex2.algebra, ex2.bracket
    E = ex2.derivations["E"]
    for i in range(A.dim):
        assert np.array_equal(J(A.one, A.basis(i)), E(A.basis(i)))
    y = A.parse("y")
    assert A.field.is_zero(J(y, y))
    assert A.format(J(A.parse("x"), y)) == "x^2*y + x^2*z"


@pytest.mark.parametrize("name", ["ex1", "ex1_gf2", "ex2"])
def test_table_matches_oracle(name, request):
    inst = request.getfixturevalue(name)
    A, J = inst.algebra, inst.bracket
    Q, br = oracle_bracket(inst)
    for i, mi in enumerate(A.monomials):
        for j, mj in enumerate(A.monomials):
            want = [A.field(c) for c in oracles.to_vec(A, br(Q.mono(mi), Q.mono(mj)))]
            assert [A.field(c) for c in J.table[i, j]] == want


@pytest.mark.parametrize("name", ["ex1", "ex1_gf2", "ex2"])
def test_presets_are_jacobi(name, request):
    inst = request.getfixturevalue(name)
    rep = verify_jacobi(inst.bracket)
    assert rep.passed, rep.failing()
    assert [c.name for c in rep.checks] == ["alternating", "jacobi_identity", "generalized_leibniz"]


def test_derivation_pair_can_fail_jacobi():
    inst = instance(NOT_JACOBI)
    rep = verify_jacobi(inst.bracket)
    assert not rep.passed
    assert rep["alternating"].passed and rep["generalized_leibniz"].passed
    a, b, c = rep["jacobi_identity"].witnesses[0]
    A = inst.algebra
    Q, br = oracle_bracket(inst)
    ea, eb, ec = (Q.mono(A.monomials[A.names.index(n)]) for n in (a, b, c))
    cyc = Q.add(br(ea, br(eb, ec)), br(eb, br(ec, ea)), br(ec, br(ea, eb)))
    assert cyc != {}


def test_consumers_demand_a_verified_bracket():
    inst = instance(NOT_JACOBI)
    with pytest.raises(UnverifiedBracket):
        hamiltonian(inst.bracket, inst.algebra.one)
    verify_jacobi(inst.bracket)
    with pytest.raises(UnverifiedBracket):
        hamiltonian(inst.bracket, inst.algebra.one)


@pytest.mark.parametrize("name", ["ex1", "ex2"])
def test_single_perturbation_is_caught(name, request):
    inst = request.getfixturevalue(name)
    A = inst.algebra
    J = inst.bracket.perturbed(1, 2, A.one)
    rep = verify_jacobi(J)
    assert not rep.passed
    assert any(c.witnesses for c in rep.failing())
    lopsided = inst.bracket.perturbed(1, 2, A.one, antisymmetric=False)
    rep = verify_jacobi(lopsided)
    assert not rep["alternating"].passed
    assert rep["alternating"].witnesses[0] == (A.names[1], A.names[2])


def test_alternating_in_characteristic_two(ex2):
    A, J = ex2.algebra, ex2.bracket
    rng = np.random.default_rng(7)
    for _ in range(1000):
        v = A.field.random(rng, A.dim)
        assert A.field.is_zero(J(v, v))
    assert np.array_equal(J.table, J.table.transpose(1, 0, 2))
    assert not J.table[np.arange(A.dim), np.arange(A.dim)].any()


def test_table_recipe_rejects_nonstandard_arguments():
    from lrlab.dsl import DslError

    bad = "field QQ\nvars x\nideal x^2\nbracket table\n{x^2, x} = 1\n"
    with pytest.raises(DslError, match="standard monomials"):
        instance(bad)


def test_raw_table_bracket(ex1):
    A = ex1.algebra
    J = bracket_from_table(A, {(A.unit, 1): A.parse("y")})
    assert A.format(J(A.parse("x"), A.one)) == "-y"
    assert verify_jacobi(J).passed


def test_hamiltonian_values(ex1, ex2):
    A, J = ex1.algebra, ex1.bracket
    x = A.parse("x")
    assert A.field.is_zero(hamiltonian(J, x)(x))
    for name, inst in (("ex1", ex1), ("ex2", ex2)):
        B, K = inst.algebra, inst.bracket
        phi1 = hamiltonian(K, B.one)
        for c in range(B.dim):
            assert np.array_equal(phi1(B.basis(c)), K(B.one, B.basis(c)))
        for a in range(B.dim):
            assert leibniz_defects(B, hamiltonian(K, B.basis(a)).matrix) == []


def test_hamiltonian_poisson_case():
    inst = instance("field GF(3)\nvars x y\nideal x^3 y^3\nder E: x -> x\nder F: y -> y\n"
                    "bracket jacobi_pair(E, F)\n")
    A = inst.algebra
    E, F = inst.derivations["E"], inst.derivations["F"]
    # commuting derivations give the Poisson bracket {a, b} = E(a)F(b) - F(a)E(b)
    T = A.field.einsum("pa,qb,pqk->abk", E.matrix, F.matrix, A.mult)
    P = bracket_from_table(A, {(i, j): A.field.reduce(T[i, j] - T[j, i])
                               for i in range(A.dim) for j in range(i + 1, A.dim)})
    assert verify_jacobi(P).passed
    assert is_poisson(P)
    assert A.format(P(A.parse("x"), A.parse("y"))) == "x*y"
    for a in range(A.dim):
        assert np.array_equal(hamiltonian(P, A.basis(a)).matrix, P.ad(A.basis(a)))


@pytest.mark.parametrize("name", ["ex1", "ex2"])
def test_hamiltonian_homomorphism(name, request):
    inst = request.getfixturevalue(name)
    assert verify_hamiltonian_hom(inst.bracket).passed


def test_hamiltonian_homomorphism_zero_bracket(ex1):
    J = bracket_from_vector_field(zero_derivation(ex1.algebra))
    verify_jacobi(J)
    assert verify_hamiltonian_hom(J).passed


def test_is_poisson_on_examples(ex1, ex2):
    assert not is_poisson(ex1.bracket)
    assert not is_poisson(ex2.bracket)


@st.composite
def vector_fields(draw):
    p = draw(st.sampled_from([0, 2, 3, 5]))
    field = "QQ" if p == 0 else f"GF({p})"
    a = draw(st.integers(2, 4))
    b = draw(st.integers(1, 3))
    imgs = draw(st.lists(st.sampled_from(["0", "1", "x", "y", "x*y", "x^2", "2*x + y"]), min_size=2, max_size=2))
    return f"field {field}\nvars x y\nideal x^{a} y^{b} x*y^2\nder E: x -> {imgs[0]}, y -> {imgs[1]}\n" \
           "bracket vector_field(E)\n"


@settings(max_examples=40, deadline=None)
@given(vector_fields())
def test_vector_field_brackets_are_jacobi(text):
    from lrlab.algebra import IllDefinedDerivation

    try:
        inst = instance(text)
    except IllDefinedDerivation:
        return
    rep = verify_jacobi(inst.bracket)
    assert rep.passed
    J = inst.bracket
    if is_poisson(J):
        # generalized Leibniz reduces to the ordinary Leibniz rule
        for c in range(inst.algebra.dim):
            assert leibniz_defects(inst.algebra, J.ad(inst.algebra.basis(c))) == []


def test_pair_constructor_requires_common_algebra(ex1, ex2):
    from lrlab.algebra import AlgebraMismatch

    with pytest.raises(AlgebraMismatch):
        bracket_from_derivation_pair(ex1.derivations["E"], ex2.derivations["E"])


def test_pair_with_zero_second_derivation_is_vector_field(ex1):
    A = ex1.algebra
    E = ex1.derivations["E"]
    P = bracket_from_derivation_pair(E, derivation_from_images(A, {}))
    assert np.array_equal(P.table, ex1.bracket.table)
