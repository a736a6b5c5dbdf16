"""Finite-dimensional commutative algebras and their derivations.

Algebras are presented as quotients ``k[x_1..x_m] / I`` of a polynomial ring
by a monomial ideal, or directly by an audited multiplication table.  The
basis is the set of standard monomials in graded lexicographic order.

Linear maps on the algebra use the column convention: ``D[:, j]`` is the image
of the basis element ``e_j``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
import itertools
import re
from typing import Mapping, Sequence

import numpy as np

from .field import Field
from .linalg import Subspace, column_space, kernel

Monomial = tuple[int, ...]


class AlgebraError(ValueError):
    pass


class InfiniteQuotient(AlgebraError):
    pass


class IllDefinedDerivation(AlgebraError):
    def __init__(self, generator: str, residual):
        super().__init__(f"derivation does not preserve the ideal: image of {generator} is {residual}")
        self.generator = generator
        self.residual = residual


class AlgebraMismatch(AlgebraError):
    pass


@dataclass(frozen=True)
class Presentation:
    """``field[variables] / <ideal>``, or an explicit table when ``table`` is set.

    ``table`` is ``(basis_names, structure_constants)`` with
    ``structure_constants[i][j]`` the coefficient vector of ``e_i * e_j``.
    """

    field: Field
    variables: tuple[str, ...]
    ideal: tuple[Monomial, ...]
    table: tuple[tuple[str, ...], object] | None = None


def monomial_name(variables: Sequence[str], exps: Monomial) -> str:
    parts = []
    for v, e in zip(variables, exps):
        if e == 1:
            parts.append(v)
        elif e > 1:
            parts.append(f"{v}^{e}")
    return "*".join(parts) if parts else "1"


def divides(a: Monomial, b: Monomial) -> bool:
    return all(x <= y for x, y in zip(a, b))


def graded_lex_key(exps: Monomial):
    return (sum(exps), tuple(-e for e in exps))


class Algebra:
    """A commutative unital algebra with basis ``e_0..e_{n-1}``.

    ``mult[i, j]`` is the coefficient vector of ``e_i * e_j``.
    """

    def __init__(self, field: Field, names: Sequence[str], mult: np.ndarray, unit: int,
                 variables: Sequence[str] = (), monomials: Sequence[Monomial] | None = None,
                 ideal: Sequence[Monomial] = ()):
        self.field = field
        self.names = tuple(names)
        self.mult = mult
        self.unit = unit
        self.variables = tuple(variables)
        self.monomials = tuple(monomials) if monomials is not None else None
        self.ideal = tuple(ideal)
        self._index = {m: i for i, m in enumerate(self.monomials)} if self.monomials else {}
        self._left = None

    def __repr__(self) -> str:
        return f"Algebra(dim={self.dim}, field={self.field}, basis={list(self.names)})"

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def one(self) -> np.ndarray:
        return self.basis(self.unit)

    def basis(self, i: int) -> np.ndarray:
        return self.field.unit_vector(self.dim, i)

    def zero(self) -> np.ndarray:
        return self.field.zeros(self.dim)

    def index_of(self, exps: Monomial) -> int | None:
        """Basis index of a monomial, or None when it lies in the ideal."""
        return self._index.get(tuple(exps))

    def monomial(self, exps: Monomial) -> np.ndarray:
        i = self.index_of(exps)
        return self.zero() if i is None else self.basis(i)

    @property
    def generator_indices(self) -> tuple[int, ...]:
        """Basis indices of the variables that survive in the quotient."""
        out = []
        for k in range(len(self.variables)):
            e = tuple(int(j == k) for j in range(len(self.variables)))
            i = self.index_of(e)
            if i is not None:
                out.append(i)
        return tuple(out)

    # -- arithmetic ------------------------------------------------------

    def _same(self, *vs):
        for v in vs:
            if np.shape(v) != (self.dim,):
                raise AlgebraMismatch(f"element of length {np.shape(v)} in algebra of dimension {self.dim}")

    def multiply(self, a, b) -> np.ndarray:
        self._same(a, b)
        return self.field.einsum("i,j,ijk->k", a, b, self.mult)

    mul = multiply

    @property
    def left_matrices(self) -> np.ndarray:
        """``L[s]`` is multiplication by ``e_s`` (column convention)."""
        if self._left is None:
            self._left = np.ascontiguousarray(self.mult.transpose(0, 2, 1))
        return self._left

    def left(self, a) -> np.ndarray:
        self._same(a)
        return self.field.einsum("s,spk->pk", a, self.left_matrices)

    def power(self, a, k: int) -> np.ndarray:
        out = self.one
        for _ in range(k):
            out = self.multiply(out, a)
        return out

    # -- text ------------------------------------------------------------

    def format(self, v) -> str:
        f = self.field
        terms = []
        for i, c in enumerate(v):
            if c == 0:
                continue
            name = self.names[i]
            if f.characteristic:
                c = int(c)
                if c == 1:
                    terms.append(name)
                else:
                    terms.append(f"{c}*{name}" if name != "1" else str(c))
            else:
                c = Fraction(c)
                if c == 1:
                    terms.append(name)
                elif c == -1:
                    terms.append(f"-{name}")
                else:
                    terms.append(f"{c}*{name}" if name != "1" else str(c))
        if not terms:
            return "0"
        s = " + ".join(terms)
        return s.replace("+ -", "- ")

    def parse(self, text: str) -> np.ndarray:
        """Evaluate a polynomial such as ``"x^2*z + x^3"`` in the algebra."""
        from .dsl import parse_poly

        poly = parse_poly(text, self.variables)
        return self.from_poly(poly)

    def from_poly(self, terms) -> np.ndarray:
        """``terms`` is an iterable of ``(coefficient, exponent tuple)``."""
        if not self.variables and any(any(e) for _, e in terms):
            raise AlgebraError("table algebras have no variables")
        out = self.zero()
        for c, exps in terms:
            i = self.index_of(exps) if self.variables else self.unit
            if i is not None:
                out[i] = self.field(out[i] + self.field(c))
        return out

    # -- audits ----------------------------------------------------------

    def audit(self) -> list[str]:
        """Failures of unitality, commutativity or associativity on basis elements."""
        f = self.field
        M = self.mult
        problems = []
        n = self.dim
        ident = f.eye(n)
        if not np.array_equal(M[self.unit], ident) or not np.array_equal(M[:, self.unit], ident):
            problems.append("unit")
        if not np.array_equal(M, M.transpose(1, 0, 2)):
            problems.append("commutativity")
        left = f.einsum("ijm,mkp->ijkp", M, M)
        right = f.einsum("jkm,imp->ijkp", M, M)
        if not np.array_equal(left, right):
            problems.append("associativity")
        return problems


def standard_monomials(nvars: int, ideal: Sequence[Monomial]) -> list[Monomial]:
    bounds = []
    for k in range(nvars):
        pure = [g[k] for g in ideal if g[k] > 0 and all(g[j] == 0 for j in range(nvars) if j != k)]
        if not pure:
            raise InfiniteQuotient(f"variable #{k} has no pure power in the ideal")
        bounds.append(min(pure))
    mons = [e for e in itertools.product(*(range(b) for b in bounds))
            if not any(divides(g, e) for g in ideal)]
    return sorted(mons, key=graded_lex_key)


def build_algebra(p: Presentation) -> Algebra:
    f = p.field
    if p.table is not None:
        names, consts = p.table
        mult = f.array(consts)
        n = len(names)
        if mult.shape != (n, n, n):
            raise AlgebraError(f"table has shape {mult.shape}, expected {(n, n, n)}")
        unit = None
        for i in range(n):
            if np.array_equal(mult[i], f.eye(n)):
                unit = i
                break
        if unit is None:
            raise AlgebraError("invalid table: no basis element acts as the unit")
        alg = Algebra(f, names, mult, unit)
        problems = alg.audit()
        if problems:
            raise AlgebraError(f"invalid table: fails {', '.join(problems)}")
        return alg
    nvars = len(p.variables)
    for g in p.ideal:
        if len(g) != nvars:
            raise AlgebraError(f"ideal generator {g} does not match {nvars} variables")
        if not any(g):
            raise AlgebraError("the ideal contains 1; the quotient is zero")
    mons = standard_monomials(nvars, p.ideal)
    index = {m: i for i, m in enumerate(mons)}
    n = len(mons)
    mult = f.zeros((n, n, n))
    for i, a in enumerate(mons):
        for j, b in enumerate(mons):
            k = index.get(tuple(x + y for x, y in zip(a, b)))
            if k is not None:
                mult[i, j, k] = f.one
    names = [monomial_name(p.variables, m) for m in mons]
    return Algebra(f, names, mult, index[(0,) * nvars], p.variables, mons, p.ideal)


def annihilator(A: Algebra, S) -> Subspace:
    """``{a : a * s = 0 for all s in S}`` as the kernel of stacked multiplication maps."""
    S = [np.asarray(s) for s in S]
    if not S:
        raise ValueError("annihilator of an empty set")
    stacked = np.concatenate([A.left(s) for s in S])
    return kernel(stacked, A.field)


# -- derivations -----------------------------------------------------------------

class Derivation:
    """A k-linear map D with ``D(ab) = a D(b) + D(a) b``; ``matrix[:, j] = D(e_j)``."""

    def __init__(self, algebra: Algebra, matrix: np.ndarray, images: Mapping[str, np.ndarray] | None = None,
                 check: bool = True):
        self.algebra = algebra
        self.matrix = matrix
        self.images = dict(images) if images else None
        if check:
            bad = leibniz_defects(algebra, matrix, limit=1)
            if bad:
                i, j = bad[0]
                raise AlgebraError(f"not a derivation: Leibniz fails on ({algebra.names[i]}, {algebra.names[j]})")

    def __call__(self, a) -> np.ndarray:
        return self.algebra.field.matmul(self.matrix, a)

    def __repr__(self) -> str:
        return f"Derivation(dim={self.algebra.dim})"

    def image(self) -> Subspace:
        return column_space(self.matrix, self.algebra.field)

    def kernel(self) -> Subspace:
        return kernel(self.matrix, self.algebra.field)

    def __eq__(self, other):
        return isinstance(other, Derivation) and np.array_equal(self.matrix, other.matrix)


def leibniz_defects(A: Algebra, D: np.ndarray, limit: int | None = None) -> list[tuple[int, int]]:
    """Basis pairs where ``D(e_i e_j) != e_i D(e_j) + D(e_i) e_j``."""
    f = A.field
    M = A.mult
    lhs = f.einsum("ijm,pm->ijp", M, D)
    t1 = f.einsum("jm,imp->ijp", D.T, M)
    t2 = f.einsum("im,mjp->ijp", D.T, M)
    resid = f.reduce(lhs - t1 - t2)
    bad = np.argwhere(f.nonzero_mask(resid).any(axis=-1))
    out = [tuple(int(x) for x in ij) for ij in bad]
    return out if limit is None else out[:limit]


def zero_derivation(A: Algebra) -> Derivation:
    return Derivation(A, A.field.zeros((A.dim, A.dim)), check=False)


def derivation_from_images(A: Algebra, images: Mapping[str, object]) -> Derivation:
    """Extend variable images by the Leibniz rule; reject maps that do not preserve the ideal."""
    f = A.field
    if not A.variables:
        raise AlgebraError("derivation_from_images needs a monomial presentation")
    unknown = set(images) - set(A.variables)
    if unknown:
        raise AlgebraError(f"unknown variables {sorted(unknown)}")
    imgs = []
    for v in A.variables:
        img = images.get(v)
        if img is None:
            img = A.zero()
        elif isinstance(img, str):
            img = A.parse(img)
        else:
            img = f.array(img)
        imgs.append(img)
    nv = len(A.variables)

    def apply(exps: Monomial) -> np.ndarray:
        out = A.zero()
        for k in range(nv):
            e = exps[k]
            if e == 0 or f(e) == 0:
                continue
            lower = list(exps)
            lower[k] -= 1
            i = A.index_of(tuple(lower))
            if i is None:
                continue
            term = f.matmul(A.left_matrices[i], imgs[k])
            out = f.reduce(out + f(e) * term)
        return out

    for g in A.ideal:
        res = apply(g)
        if not f.is_zero(res):
            raise IllDefinedDerivation(monomial_name(A.variables, g), A.format(res))
    mat = f.zeros((A.dim, A.dim))
    for j, m in enumerate(A.monomials):
        mat[:, j] = apply(m)
    return Derivation(A, mat, dict(zip(A.variables, imgs)), check=False)


def compose(D1: Derivation, D2: Derivation) -> np.ndarray:
    """Matrix of ``D1 o D2`` (not a derivation in general)."""
    if D1.algebra is not D2.algebra:
        raise AlgebraMismatch("derivations on different algebras")
    return D1.algebra.field.matmul(D1.matrix, D2.matrix)


def der_commutator(D1: Derivation, D2: Derivation) -> Derivation:
    if D1.algebra is not D2.algebra:
        raise AlgebraMismatch("derivations on different algebras")
    f = D1.algebra.field
    m = f.reduce(f.matmul(D1.matrix, D2.matrix) - f.matmul(D2.matrix, D1.matrix))
    return Derivation(D1.algebra, m, check=False)


def derivation_image(D: Derivation) -> Subspace:
    return D.image()


def parse_monomial_list(text: str, variables: Sequence[str]) -> list[Monomial]:
    """Helper for tests: ``"x^3, y^4, x*y^2"`` -> exponent tuples."""
    out = []
    for part in re.split(r"[,\s]+", text.strip()):
        if not part:
            continue
        exps = [0] * len(variables)
        for factor in part.split("*"):
            if factor == "1":
                continue
            name, _, power = factor.partition("^")
            exps[variables.index(name)] += int(power) if power else 1
        out.append(tuple(exps))
    return out
