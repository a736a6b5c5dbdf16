"""Jacobi brackets on finite-dimensional commutative algebras.

A Jacobi bracket is a Lie bracket satisfying the generalized Leibniz rule
``{ab, c} = a{b, c} + b{a, c} - ab{1, c}``.  Brackets are stored as a table
``table[i, j] = {e_i, e_j}`` and are never trusted until :func:`verify_jacobi`
has marked them valid.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .algebra import Algebra, AlgebraMismatch, Derivation, leibniz_defects
from .verification import VerificationReport

UNCHECKED, VALID, INVALID = "unchecked", "valid", "invalid"


class UnverifiedBracket(ValueError):
    pass


class JacobiBracket:
    def __init__(self, algebra: Algebra, table: np.ndarray, recipe: tuple = ("raw-table",)):
        n = algebra.dim
        if table.shape != (n, n, n):
            raise ValueError(f"bracket table has shape {table.shape}, expected {(n, n, n)}")
        self.algebra = algebra
        self.table = table
        self.recipe = recipe
        self.status = UNCHECKED
        self.report: VerificationReport | None = None
        self._ad = None
        self._phi = None

    def __repr__(self) -> str:
        return f"JacobiBracket({self.recipe[0]}, dim={self.algebra.dim}, {self.status})"

    @property
    def field(self):
        return self.algebra.field

    def __call__(self, a, b) -> np.ndarray:
        return self.field.einsum("i,j,ijk->k", a, b, self.table)

    @property
    def ad_matrices(self) -> np.ndarray:
        """``ad[i]`` is the matrix of ``{e_i, .}``."""
        if self._ad is None:
            self._ad = np.ascontiguousarray(self.table.transpose(0, 2, 1))
        return self._ad

    def ad(self, a) -> np.ndarray:
        return self.field.einsum("i,ipj->pj", a, self.ad_matrices)

    @property
    def one_map(self) -> np.ndarray:
        """Matrix of ``{1, .}``; a derivation whenever the bracket is Jacobi."""
        return self.ad_matrices[self.algebra.unit]

    @property
    def phi_matrices(self) -> np.ndarray:
        """``phi[j]`` is the matrix of ``Phi_{e_j} = {e_j, .} + . * {1, e_j}``."""
        if self._phi is None:
            f = self.field
            M = self.algebra.mult
            E = self.table[self.algebra.unit]
            self._phi = f.reduce(self.ad_matrices + f.einsum("jm,kmp->jpk", E, M))
        return self._phi

    def require_valid(self):
        if self.status != VALID:
            raise UnverifiedBracket(f"bracket is {self.status}; run verify_jacobi first")

    def copy(self) -> "JacobiBracket":
        return JacobiBracket(self.algebra, self.table.copy(), self.recipe)

    def perturbed(self, i: int, j: int, delta, antisymmetric: bool = True) -> "JacobiBracket":
        """Copy with ``delta`` added to ``{e_i, e_j}`` (and subtracted from ``{e_j, e_i}``)."""
        f = self.field
        t = self.table.copy()
        delta = f.array(delta)
        t[i, j] = f.reduce(t[i, j] + delta)
        if antisymmetric and i != j:
            t[j, i] = f.reduce(t[j, i] - delta)
        return JacobiBracket(self.algebra, t, ("raw-table",))


def _same_algebra(*ders: Derivation):
    alg = ders[0].algebra
    if any(d.algebra is not alg for d in ders):
        raise AlgebraMismatch("derivations on different algebras")
    return alg


def bracket_from_vector_field(E: Derivation) -> JacobiBracket:
    """``{a, b} = a E(b) - E(a) b``."""
    A = E.algebra
    f = A.field
    D = E.matrix
    t = f.reduce(f.einsum("mj,imk->ijk", D, A.mult) - f.einsum("mi,mjk->ijk", D, A.mult))
    return JacobiBracket(A, t, ("vector-field",))


def bracket_from_derivation_pair(E: Derivation, F: Derivation) -> JacobiBracket:
    """``{a, b} = E(a) F(b) - F(a) E(b) + a E(b) - E(a) b``; Jacobi only under extra vanishing."""
    A = _same_algebra(E, F)
    f = A.field
    M = A.mult
    e, g = E.matrix, F.matrix
    ef = f.einsum("mi,qj,mqk->ijk", e, g, M)
    t = f.reduce(ef - ef.transpose(1, 0, 2) + f.einsum("mj,imk->ijk", e, M) - f.einsum("mi,mjk->ijk", e, M))
    return JacobiBracket(A, t, ("derivation-pair",))


def bracket_from_table(A: Algebra, entries: Mapping[tuple[int, int], object]) -> JacobiBracket:
    """Alternating completion of the given ``{e_i, e_j}`` values (unlisted pairs are zero)."""
    f = A.field
    n = A.dim
    t = f.zeros((n, n, n))
    seen = {}
    for (i, j), v in entries.items():
        v = f.array(v)
        if i == j:
            if not f.is_zero(v):
                raise ValueError(f"{{{A.names[i]}, {A.names[i]}}} must be zero")
            continue
        key = (min(i, j), max(i, j))
        val = v if i < j else f.reduce(-v)
        if key in seen and not np.array_equal(seen[key], val):
            raise ValueError(f"conflicting values for {{{A.names[i]}, {A.names[j]}}}")
        seen[key] = val
    for (i, j), v in seen.items():
        t[i, j] = v
        t[j, i] = f.reduce(-v)
    return JacobiBracket(A, t, ("raw-table",))


def _triples(A: Algebra, mask: np.ndarray):
    return [tuple(A.names[k] for k in idx) for idx in np.argwhere(mask)]


def verify_jacobi(b: JacobiBracket, cap: int = 10) -> VerificationReport:
    """Alternation, Jacobi identity and generalized Leibniz on all basis pairs/triples."""
    A = b.algebra
    f = A.field
    T = b.table
    M = A.mult
    n = A.dim
    rep = VerificationReport("jacobi")

    diag = f.nonzero_mask(T[np.arange(n), np.arange(n)]).any(axis=-1)
    skew = f.nonzero_mask(f.reduce(T + T.transpose(1, 0, 2))).any(axis=-1)
    bad = [(A.names[i], A.names[i]) for i in np.flatnonzero(diag)]
    bad += [(A.names[i], A.names[j]) for i, j in np.argwhere(skew) if i < j]
    rep.add("alternating", bad, cap=cap)

    X = f.einsum("bcm,amk->abck", T, T)
    jac = f.reduce(X + X.transpose(2, 0, 1, 3) + X.transpose(1, 2, 0, 3))
    mask = f.nonzero_mask(jac).any(axis=-1)
    rep.add("jacobi_identity", _triples(A, mask), cap=cap)

    lhs = f.einsum("abm,mck->abck", M, T)
    t1 = f.einsum("bcm,amk->abck", T, M)
    t2 = f.einsum("acm,bmk->abck", T, M)
    t3 = f.einsum("abm,cq,mqk->abck", M, T[A.unit], M)
    mask = f.nonzero_mask(f.reduce(lhs - t1 - t2 + t3)).any(axis=-1)
    rep.add("generalized_leibniz", _triples(A, mask), cap=cap)

    b.status = VALID if rep.passed else INVALID
    b.report = rep
    return rep


def hamiltonian(b: JacobiBracket, a) -> Derivation:
    """``Phi_a = {a, .} + . * {1, a}``."""
    b.require_valid()
    f = b.field
    m = f.einsum("j,jpk->pk", a, b.phi_matrices)
    return Derivation(b.algebra, m, check=False)


def verify_hamiltonian_hom(b: JacobiBracket, cap: int = 10) -> VerificationReport:
    """Each ``Phi_{e_i}`` is a derivation and ``Phi_{{a,b}} = [Phi_a, Phi_b]`` on basis pairs."""
    b.require_valid()
    A = b.algebra
    f = A.field
    phi = b.phi_matrices
    rep = VerificationReport("hamiltonian")
    bad = []
    for j in range(A.dim):
        for (p, q) in leibniz_defects(A, phi[j]):
            bad.append((A.names[j], A.names[p], A.names[q]))
    rep.add("phi_is_derivation", bad, cap=cap)
    lhs = f.einsum("abm,mpk->abpk", b.table, phi)
    prod = f.einsum("apm,bmk->abpk", phi, phi)
    resid = f.reduce(lhs - prod + prod.transpose(1, 0, 2, 3))
    mask = f.nonzero_mask(resid).any(axis=(-1, -2))
    rep.add("phi_lie_hom", [(A.names[i], A.names[j]) for i, j in np.argwhere(mask)], cap=cap)
    return rep


def is_poisson(b: JacobiBracket) -> bool:
    return b.field.is_zero(b.table[b.algebra.unit])


def ah_hypothesis_witnesses(b: JacobiBracket, ann_basis: np.ndarray) -> list[tuple[int, int, int]]:
    """Triples ``(r, i, j)`` with ``r * {e_i, e_j} != 0`` for annihilator basis rows ``r``."""
    f = b.field
    if len(ann_basis) == 0:
        return []
    prod = f.einsum("rm,ijq,mqk->rijk", ann_basis, b.table, b.algebra.mult)
    return [tuple(int(x) for x in w) for w in np.argwhere(f.nonzero_mask(prod).any(axis=-1))]
