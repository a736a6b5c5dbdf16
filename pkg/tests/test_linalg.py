from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from lrlab.algebra import annihilator
from lrlab.field import Field, FieldMismatch
from lrlab.linalg import (
    AffineSubspace,
    DimensionMismatch,
    Subspace,
    affine_span,
    intersect,
    kernel,
    membership,
    rank,
    rref,
    solve_affine,
)

FIELDS = [Field.gf(2), Field.gf(3), Field.gf(7), Field.qq()]


@st.composite
def matrices(draw, max_rows=6, max_cols=6):
    f = draw(st.sampled_from(FIELDS))
    r = draw(st.integers(1, max_rows))
    c = draw(st.integers(1, max_cols))
    entries = draw(st.lists(st.lists(st.integers(-3, 3), min_size=c, max_size=c), min_size=r, max_size=r))
    return f, entries


def as_list(f, arr):
    return [[f(x) for x in row] for row in np.asarray(arr)]


# -- fields ---------------------------------------------------------------------------

def test_field_descriptor():
    assert Field.gf(5).kind == "prime-field" and Field.gf(5).characteristic == 5
    assert Field.qq().kind == "rationals" and Field.qq().characteristic == 0
    with pytest.raises(ValueError):
        Field.gf(4)


def test_field_rejects_floats_and_bad_denominators():
    with pytest.raises(FieldMismatch):
        Field.qq()(0.5)
    with pytest.raises(FieldMismatch):
        Field.gf(3)(Fraction(1, 3))
    assert Field.gf(5)(Fraction(1, 2)) == 3


def test_field_json_encoding():
    assert Field.qq().to_json(Fraction(-3, 4)) == "-3/4"
    assert Field.qq().to_json(Fraction(2)) == "2"
    assert Field.gf(7).to_json(10) == 3


@given(st.sampled_from(FIELDS[:3]), st.integers(1, 40), st.integers(0, 2**31))
def test_matmul_matches_python_arithmetic(f, n, seed):
    rng = np.random.default_rng(seed)
    a = f.random(rng, (3, n))
    b = f.random(rng, (n, 2))
    expect = [[sum(int(a[i, k]) * int(b[k, j]) for k in range(n)) % f.p for j in range(2)] for i in range(3)]
    assert f.matmul(a, b).tolist() == expect


# -- rref ----------------------------------------------------------------------------

def test_rref_identity_gf2():
    f = Field.gf(2)
    R, piv = rref(np.eye(3, dtype=np.int64), f)
    assert R.tolist() == np.eye(3, dtype=int).tolist() and piv == (0, 1, 2)


def test_rref_all_ones_gf2():
    R, piv = rref([[1, 1], [1, 1]], Field.gf(2))
    assert R.tolist() == [[1, 1], [0, 0]] and piv == (0,)


def test_rref_rank_two_rational():
    m = [[1, 2, 3], [2, 4, 6], [1, 0, 1]]
    f = Field.qq()
    R, piv = rref(m, f)
    ref, ref_piv = oracles.rref(m)
    assert len(piv) == 2
    assert as_list(f, R[:2]) == ref and list(piv) == ref_piv


def test_rref_rejects_float_entries():
    with pytest.raises(FieldMismatch):
        rref(np.array([[0.5, 1.0]]), Field.qq())


@settings(max_examples=80, deadline=None)
@given(matrices())
def test_rref_matches_oracle_and_is_idempotent(data):
    f, m = data
    R, piv = rref(m, f)
    ref, ref_piv = oracles.rref(m, f.p)
    assert list(piv) == ref_piv
    assert as_list(f, R[: len(piv)]) == ref
    R2, piv2 = rref(R, f)
    assert np.array_equal(R2, R) and piv2 == piv


@settings(max_examples=60, deadline=None)
@given(matrices(), st.integers(0, 2**31))
def test_row_equivalent_matrices_share_rref(data, seed):
    f, m = data
    rng = np.random.default_rng(seed)
    m = f.array(m)
    r = m.shape[0]
    # random invertible row operation: unit lower triangular times a permutation
    T = f.random(rng, (r, r))
    T = np.tril(T, -1) + f.eye(r)
    T = T[rng.permutation(r)]
    assert np.array_equal(rref(f.matmul(T, m), f)[0], rref(m, f)[0])


# -- solve_affine ------------------------------------------------------------------

def test_solve_zero_system_is_everything():
    f = Field.qq()
    S = solve_affine(f.zeros((2, 3)), f.zeros(2), f)
    assert not S.is_empty and S.direction.dim == 3


def test_solve_zero_matrix_nonzero_rhs_is_empty_with_certificate():
    f = Field.gf(3)
    m = f.zeros((2, 3))
    b = f.array([0, 2])
    S = solve_affine(m, b, f)
    assert S.is_empty
    assert S.certificate.row == 1
    assert S.certificate.check(f, m, b)


def test_solve_dimension_mismatch():
    f = Field.gf(2)
    with pytest.raises(DimensionMismatch):
        solve_affine(f.zeros((2, 3)), f.zeros(3), f)


@settings(max_examples=80, deadline=None)
@given(matrices(), st.lists(st.integers(-3, 3), min_size=6, max_size=6))
def test_solve_affine_matches_oracle(data, rhs):
    f, m = data
    b = rhs[: len(m)]
    S = solve_affine(m, b, f)
    ref = oracles.solve(m, b, len(m[0]), f.p)
    if ref is None:
        assert S.is_empty
        assert S.certificate.check(f, m, b)
        return
    x, null = ref
    assert not S.is_empty
    assert [f(v) for v in S.particular] == x
    mm = f.array(m)
    assert np.array_equal(f.matmul(mm, S.particular), f.array(b))
    for d in S.direction.basis:
        assert f.is_zero(f.matmul(mm, d))
    assert S.direction.dim == len(null)


# -- kernel, intersection, membership ---------------------------------------------

def test_kernel_of_identity_is_zero():
    f = Field.gf(5)
    assert kernel(f.eye(4), f).dim == 0


def test_kernel_of_multiplication_by_y(ex1):
    A = ex1.algebra
    K = kernel(A.left(A.parse("y")), A.field)
    assert K == Subspace.from_rows(A.field, 3, [A.parse("x"), A.parse("y")])


def test_kernel_of_mu_on_one_dimensional_algebra():
    from lrlab.algebra import Presentation, build_algebra

    A = build_algebra(Presentation(Field.qq(), (), ()))
    mu = A.mult.reshape(1, 1)
    assert kernel(mu, A.field).dim == 0


@settings(max_examples=80, deadline=None)
@given(matrices())
def test_rank_nullity(data):
    f, m = data
    assert rank(m, f) + kernel(m, f).dim == len(m[0])
    assert kernel(m, f).dim == len(oracles.nullspace(m, len(m[0]), f.p))


def test_intersection_trivial_cases():
    f = Field.gf(3)
    V = Subspace.from_rows(f, 4, [[1, 2, 0, 0], [0, 0, 1, 1]])
    assert intersect([V, V]) == V
    assert intersect([V, Subspace.zero(f, 4)]).dim == 0


def test_intersection_ambient_mismatch():
    f = Field.gf(3)
    with pytest.raises(DimensionMismatch):
        intersect([Subspace.full(f, 2), Subspace.full(f, 3)])


def test_common_annihilator_example2(ex2):
    A = ex2.algebra
    ann = annihilator(A, [ex2.h])
    H = intersect([annihilator(A, [r]) for r in ann.basis])
    listed = ("x^2 x^3 x^2*y x^2*y^2 x^2*y^3 x^2*z x^2*y*z x^2*y^2*z x^2*y^3*z y^2 x*y^2 y^3 y^4 y^5 "
              "y^2*z x*y^3 x*y^2*z y^3*z y^4*z y^5*z x*y^3*z").split()
    assert H.dim == 21
    assert H == Subspace.from_rows(A.field, A.dim, [A.parse(m) for m in listed])


@st.composite
def subspace_pairs(draw):
    f = draw(st.sampled_from(FIELDS))
    n = draw(st.integers(1, 6))
    rows = st.lists(st.lists(st.integers(-2, 2), min_size=n, max_size=n), min_size=0, max_size=4)
    return f, n, draw(rows), draw(rows)


@settings(max_examples=80, deadline=None)
@given(subspace_pairs())
def test_intersection_dimension_formula(data):
    f, n, ra, rb = data
    A = Subspace.from_rows(f, n, f.array(ra).reshape(-1, n))
    B = Subspace.from_rows(f, n, f.array(rb).reshape(-1, n))
    C = intersect([A, B])
    assert C.is_subspace_of(A) and C.is_subspace_of(B)
    assert A.dim + B.dim == (A + B).dim + C.dim
    for v in C.basis:
        assert oracles.in_span(v, ra, f.p) and oracles.in_span(v, rb, f.p)


def test_membership_examples(ex2):
    f = Field.gf(2)
    V = Subspace.from_rows(f, 3, [[1, 1, 0]])
    assert membership(f.zeros(3), V)
    assert membership(f.array([1, 1, 0]), V)
    A = ex2.algebra
    ImE = ex2.derivations["E"].image()
    base = A.parse("x^2*z + x^2*y")
    extra = [A.parse("x^2*y^2*z"), A.parse("x^2*y^3"), A.parse("x^2*y^3*z")]
    for lam in np.ndindex(2, 2, 2):
        v = A.field.reduce(base + sum(c * e for c, e in zip(lam, extra)))
        assert not membership(v, ImE)
    assert membership(A.parse("x^2*z + x^3"), ImE)


def test_subspace_basis_is_canonical():
    f = Field.qq()
    a = Subspace.from_rows(f, 3, [[1, 1, 0], [0, 1, 1]])
    b = Subspace.from_rows(f, 3, [[1, 2, 1], [2, 3, 1]])
    assert a == b and np.array_equal(a.basis, b.basis)
    assert list(a.pivots) == sorted(a.pivots)


def test_affine_span_matches_solver_representative():
    f = Field.gf(3)
    m = f.array([[1, 1, 0, 2], [0, 0, 1, 1]])
    S = solve_affine(m, f.array([1, 2]), f)
    shifted = f.reduce(S.particular + S.direction.basis[0] * 2)
    T = affine_span(f, shifted, S.direction)
    assert np.array_equal(T.particular, S.particular)
    assert isinstance(T, AffineSubspace) and shifted in T
