"""Lie-Rinehart algebras built from a Jacobi algebra.

Everything here is a finite-dimensional k-space with an explicit basis
``f_0..f_{d-1}``.  Structures expose the same small interface:

* ``act_batch(s, V)`` multiplies the rows of ``V`` by the algebra basis
  element ``e_s``;
* ``left_ad(V)[c][:, t] = [V_c, f_t]`` and ``right_ad(V)[c][:, t] = [f_t, V_c]``;
* ``anchor_tensor[t]`` is the derivation ``rho(f_t)`` as a matrix.

Subquotients (the 1-jet module, the quotient by ``h``) are stored as
canonical coset representatives modulo a relation subspace, so that equality
of elements is equality of coordinate vectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .algebra import Algebra, AlgebraMismatch, annihilator, leibniz_defects
from .field import Field
from .jacobi import JacobiBracket, ah_hypothesis_witnesses
from .linalg import Subspace, kernel
from .verification import VerificationReport

FULL_SCOPE_MAX_DIM = 64
_CHUNK = 32


class ConditionViolation(ValueError):
    """The quotient by ``h`` is not a Lie-Rinehart quotient."""

    def __init__(self, condition: int, witness, message: str):
        super().__init__(f"condition ({condition}) fails: {message}")
        self.condition = condition
        self.witness = witness


class HypothesisViolation(ValueError):
    """Some ``r`` in ``Ann(h)`` does not kill the bracket."""

    def __init__(self, witness: tuple[int, int, int], message: str):
        super().__init__(message)
        self.witness = witness


def _check_algebra(A: Algebra, J: JacobiBracket):
    if J.algebra is not A:
        raise AlgebraMismatch("bracket belongs to a different algebra")
    J.require_valid()


def _chunks(n: int, size: int = _CHUNK):
    for start in range(0, n, size):
        yield slice(start, min(n, start + size))


# -- subquotients --------------------------------------------------------------

class Subquotient:
    """Classes of ``span`` modulo ``relations`` (``span=None`` means the whole space).

    The k-basis is the reduced-row-echelon basis of ``span`` reduced modulo
    ``relations``; coordinates of a class are read off at its pivot columns.
    """

    def __init__(self, field: Field, ambient_dim: int, relations: Subspace, span: Subspace | None = None):
        self.field = field
        self.ambient_dim = ambient_dim
        self.relations = relations
        self.span = span
        if span is None:
            free = list(relations.complement_columns)
            basis = field.zeros((len(free), ambient_dim))
            for k, c in enumerate(free):
                basis[k, c] = field.one
            self.complement = Subspace(field, ambient_dim, basis, free)
        else:
            if not relations.is_subspace_of(span):
                raise ValueError("relations are not contained in the spanning subspace")
            self.complement = Subspace.from_rows(field, ambient_dim, relations.reduce(span.basis))
        self._cols = np.array(self.complement.pivots, dtype=np.int64)
        self._piv = np.array(relations.pivots, dtype=np.int64)
        rel_on_cols = relations.basis[:, self._cols] if relations.dim else None
        self._rel_on_cols = None if rel_on_cols is None or not rel_on_cols.any() else rel_on_cols

    @property
    def dim(self) -> int:
        return self.complement.dim

    @property
    def full_span(self) -> bool:
        return self.span is None

    @property
    def lift_columns(self) -> np.ndarray:
        """Parent basis indices whose classes form the basis (only for ``span=None``)."""
        return self._cols

    def project(self, V) -> np.ndarray:
        """Coordinates of the classes of the vectors in the last axis of ``V``."""
        V = np.asarray(V)
        out = V[..., self._cols]
        if self._rel_on_cols is not None:
            f = self.field
            out = f.reduce(out - f.matmul(V[..., self._piv], self._rel_on_cols))
        return out

    def lift(self, C) -> np.ndarray:
        return self.field.matmul(np.asarray(C), self.complement.basis)


# -- modules -------------------------------------------------------------------

class AModule:
    """A finite-dimensional module over ``algebra`` with a distinguished generating set."""

    algebra: Algebra
    dim: int

    @property
    def field(self) -> Field:
        return self.algebra.field

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f"f{i}" for i in range(self.dim))

    @property
    def generators(self) -> np.ndarray:
        return self.field.eye(self.dim)

    def act_batch(self, s: int, V) -> np.ndarray:
        raise NotImplementedError

    def act_matrix(self, s: int) -> np.ndarray:
        return np.ascontiguousarray(self.act_batch(s, self.field.eye(self.dim)).T)

    def act_vec(self, a, V) -> np.ndarray:
        """Multiply the rows of ``V`` by the algebra element ``a``."""
        f = self.field
        V = np.asarray(V)
        out = f.zeros(V.shape)
        for s in np.flatnonzero(f.nonzero_mask(a)):
            out = f.reduce(out + a[s] * self.act_batch(int(s), V))
        return out

    def format(self, v) -> str:
        f = self.field
        terms = []
        for i in np.flatnonzero(f.nonzero_mask(v)):
            c = v[i]
            name = self.names[i]
            terms.append(name if c == 1 else f"{f.to_json(c)}*{name}")
        return " + ".join(terms) if terms else "0"


class TensorSquareModule(AModule):
    """``A (x) A`` with ``A`` acting on the left factor; basis ``e_i (x) e_j`` at ``i*n + j``."""

    def __init__(self, algebra: Algebra):
        self.algebra = algebra
        self.n = algebra.dim
        self.dim = self.n * self.n

    @cached_property
    def names(self):
        nm = self.algebra.names
        return tuple(f"{a}⊗{b}" for a in nm for b in nm)

    @cached_property
    def generators(self) -> np.ndarray:
        """``1 (x) e_j``."""
        f = self.field
        n = self.n
        G = f.zeros((n, self.dim))
        for j in range(n):
            G[j, self.algebra.unit * n + j] = f.one
        return G

    def act_batch(self, s, V):
        V = np.asarray(V)
        n = self.n
        W = V.reshape(V.shape[:-1] + (n, n))
        out = self.field.einsum("pi,...ij->...pj", self.algebra.left_matrices[s], W)
        return out.reshape(V.shape)

    def pure(self, a, b) -> np.ndarray:
        """The element ``a (x) b``."""
        return self.field.reduce(np.multiply.outer(a, b).reshape(-1))


class QuotientModule(AModule):
    def __init__(self, parent: AModule, sq: Subquotient, names=None):
        self.parent = parent
        self.algebra = parent.algebra
        self.sq = sq
        self.dim = sq.dim
        self._names = names

    @cached_property
    def names(self):
        if self._names is not None:
            return tuple(self._names)
        if self.sq.full_span:
            return tuple(f"[{self.parent.names[c]}]" for c in self.sq.lift_columns)
        return tuple(f"w{i}" for i in range(self.dim))

    @cached_property
    def generators(self):
        if self.sq.full_span:
            return self.sq.project(self.parent.generators)
        return self.field.eye(self.dim)

    def act_batch(self, s, V):
        return self.sq.project(self.parent.act_batch(s, self.sq.lift(V)))


class TableModule(AModule):
    def __init__(self, algebra: Algebra, act: np.ndarray, generators=None, names=None):
        self.algebra = algebra
        self.act = act
        self.dim = act.shape[1]
        self._gens = generators
        self._names = names

    @property
    def names(self):
        return tuple(self._names) if self._names is not None else AModule.names.fget(self)

    @property
    def generators(self):
        return self._gens if self._gens is not None else self.field.eye(self.dim)

    def act_batch(self, s, V):
        V = np.asarray(V)
        return self.field.matmul(V, self.act[s].T)


# -- Lie-Rinehart structures -------------------------------------------------------

class LieRinehart:
    """Common interface; see the module docstring."""

    module: AModule
    provenance: str = "custom"

    @property
    def algebra(self) -> Algebra:
        return self.module.algebra

    @property
    def field(self) -> Field:
        return self.algebra.field

    @property
    def dim(self) -> int:
        return self.module.dim

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.provenance}, dim={self.dim})"

    @property
    def anchor_tensor(self) -> np.ndarray:
        raise NotImplementedError

    def left_ad(self, V) -> np.ndarray:
        raise NotImplementedError

    def right_ad(self, V) -> np.ndarray:
        raise NotImplementedError

    def bracket(self, u, v) -> np.ndarray:
        return self.field.matmul(self.left_ad(np.asarray(u)[None])[0], v)

    def anchor(self, u) -> np.ndarray:
        return self.field.einsum("t,tpk->pk", u, self.anchor_tensor)

    @cached_property
    def bracket_tensor(self) -> np.ndarray:
        """``B[t, u] = [f_t, f_u]`` (materialised; intended for small structures)."""
        f = self.field
        d = self.dim
        B = f.zeros((d, d, d))
        for sl in _chunks(d):
            X = self.left_ad(f.eye(d)[sl])
            B[sl] = X.transpose(0, 2, 1)
        return B

    @cached_property
    def action_rows(self) -> np.ndarray:
        """``action_rows[s][t]`` is ``e_s * f_t``."""
        eye = self.field.eye(self.dim)
        return np.stack([self.module.act_batch(s, eye) for s in range(self.algebra.dim)])

    def action_tensor(self) -> np.ndarray:
        return np.stack([self.module.act_matrix(s) for s in range(self.algebra.dim)])

    def materialize(self, provenance: str | None = None) -> "TableLieRinehart":
        return TableLieRinehart(self.algebra, self.action_tensor(), self.bracket_tensor, self.anchor_tensor,
                                generators=self.module.generators, names=self.module.names,
                                provenance=provenance or self.provenance)

    def with_bracket_entry(self, t: int, u: int, delta) -> "LieRinehart":
        """Lazy copy with ``delta`` added to the single entry ``[f_t, f_u]``."""
        return PerturbedLR(self, bracket=(t, u, delta))

    def with_anchor_entry(self, t: int, matrix_delta) -> "LieRinehart":
        """Lazy copy with ``matrix_delta`` added to ``rho(f_t)``."""
        return PerturbedLR(self, anchor=(t, matrix_delta))

    def with_action_entry(self, s: int, t: int, delta) -> "LieRinehart":
        """Lazy copy with ``delta`` added to ``e_s * f_t``."""
        return PerturbedLR(self, action=(s, t, delta))


class _PerturbedModule(AModule):
    def __init__(self, base: AModule, s: int, t: int, delta):
        self.base = base
        self.algebra = base.algebra
        self.dim = base.dim
        self._entry = (s, t, base.field.array(delta))

    @property
    def names(self):
        return self.base.names

    @property
    def generators(self):
        return self.base.generators

    def act_batch(self, s, V):
        V = np.asarray(V)
        X = self.base.act_batch(s, V)
        s0, t, delta = self._entry
        if s == s0:
            X = self.field.reduce(X + V[:, t, None] * delta[None])
        return X


class PerturbedLR(LieRinehart):
    """A structure that differs from ``base`` in one bracket entry and/or one anchor value.

    Nothing is materialised, so this works for structures too large to tabulate;
    it exists to confirm that the verification suite notices single-entry defects.
    """

    def __init__(self, base: LieRinehart, bracket=None, anchor=None, action=None):
        f = base.field
        self.base = base
        self.module = base.module if action is None else _PerturbedModule(base.module, *action)
        self.provenance = base.provenance
        self._bracket = None if bracket is None else (bracket[0], bracket[1], f.array(bracket[2]))
        self._anchor = None if anchor is None else (anchor[0], f.array(anchor[1]))

    @cached_property
    def anchor_tensor(self):
        R = self.base.anchor_tensor
        if self._anchor is None:
            return R
        t, delta = self._anchor
        R = R.copy()
        R[t] = self.field.reduce(R[t] + delta)
        return R

    def left_ad(self, V):
        V = np.asarray(V)
        X = self.base.left_ad(V)
        if self._bracket is not None:
            t, u, delta = self._bracket
            X = X.copy()
            X[:, :, u] = self.field.reduce(X[:, :, u] + V[:, t, None] * delta[None])
        return X

    def right_ad(self, V):
        V = np.asarray(V)
        X = self.base.right_ad(V)
        if self._bracket is not None:
            t, u, delta = self._bracket
            X = X.copy()
            X[:, :, t] = self.field.reduce(X[:, :, t] + V[:, u, None] * delta[None])
        return X


class TableLieRinehart(LieRinehart):
    """A structure given by explicit action, bracket and anchor tensors."""

    def __init__(self, algebra: Algebra, act, bracket, anchor, generators=None, names=None,
                 provenance: str = "custom"):
        self.module = TableModule(algebra, act, generators, names)
        self._B = bracket
        self._R = anchor
        self.provenance = provenance

    @property
    def anchor_tensor(self):
        return self._R

    @property
    def bracket_tensor(self):
        return self._B

    def left_ad(self, V):
        return self.field.einsum("cu,utp->cpt", np.asarray(V), self._B)

    def right_ad(self, V):
        return self.field.einsum("cu,tup->cpt", np.asarray(V), self._B)

    def with_bracket_entry(self, t: int, u: int, delta) -> "TableLieRinehart":
        """Copy with ``delta`` added to the single entry ``[f_t, f_u]``."""
        f = self.field
        B = self._B.copy()
        B[t, u] = f.reduce(B[t, u] + f.array(delta))
        return TableLieRinehart(self.algebra, self.module.act, B, self._R, self.module._gens,
                                self.module._names, self.provenance)

    def with_anchor_entry(self, t: int, matrix_delta) -> "TableLieRinehart":
        f = self.field
        R = self._R.copy()
        R[t] = f.reduce(R[t] + f.array(matrix_delta))
        return TableLieRinehart(self.algebra, self.module.act, self._B, R, self.module._gens,
                                self.module._names, self.provenance)


class TensorSquare(LieRinehart):
    """``(A, A (x) A)`` with ``rho(a (x) b) = a Phi_b`` and
    ``[a (x) f, b (x) g] = ab (x) {f, g} + a Phi_f(b) (x) g - b Phi_g(a) (x) f``."""

    provenance = "tensor-square"

    def __init__(self, jacobi: JacobiBracket):
        jacobi.require_valid()
        self.jacobi = jacobi
        self.module = TensorSquareModule(jacobi.algebra)

    @cached_property
    def _ep(self) -> np.ndarray:
        """``EP[i, j, k] = e_i * Phi_j(e_k)``."""
        A = self.algebra
        return self.field.einsum("imp,jmk->ijkp", A.mult, self.jacobi.phi_matrices)

    @cached_property
    def anchor_tensor(self):
        A = self.algebra
        n = A.dim
        R = self.field.einsum("ipm,jmk->ijpk", A.left_matrices, self.jacobi.phi_matrices)
        return R.reshape(n * n, n, n)

    def _shape(self, V):
        V = np.asarray(V)
        n = self.algebra.dim
        return V.reshape(V.shape[0], n, n)

    def left_ad(self, V):
        f = self.field
        A = self.algebra
        n = A.dim
        U = self._shape(V)
        c = U.shape[0]
        X = f.einsum("cij,ikp,jlq->cpqkl", U, A.mult, self.jacobi.table)
        Y2 = f.einsum("cij,ijkp->ckp", U, self._ep)
        for l in range(n):
            X[:, :, l, :, l] += Y2.transpose(0, 2, 1)
        X = X - f.einsum("cij,klip->cpjkl", U, self._ep)
        return f.reduce(X).reshape(c, n * n, n * n)

    def right_ad(self, V):
        f = self.field
        A = self.algebra
        n = A.dim
        W = self._shape(V)
        c = W.shape[0]
        X = f.einsum("ckl,ikp,jlq->cpqij", W, A.mult, self.jacobi.table)
        X = X + f.einsum("ckq,ijkp->cpqij", W, self._ep)
        Y3 = f.einsum("ckl,klip->cpi", W, self._ep)
        for j in range(n):
            X[:, :, j, :, j] -= Y3
        return f.reduce(X).reshape(c, n * n, n * n)

    def right_ad_paired(self, V, N):
        """``out[c, t, s] = sum_pq [f_t, v_c]_pq N[pq, s]`` without forming ``right_ad``.

        With ``N`` a matrix whose kernel is a subspace ``S``, the zero entries
        say exactly which brackets land in ``S``.
        """
        f = self.field
        A = self.algebra
        n = A.dim
        W = self._shape(V)
        c = W.shape[0]
        N4 = np.asarray(N).reshape(n, n, -1)
        NT = f.einsum("jlq,pqs->pjls", self.jacobi.table, N4)
        WM = f.einsum("ckl,ikp->cilp", W, A.mult)
        X = f.einsum("cilp,pjls->cijs", WM, NT)
        WN = f.einsum("ckq,pqs->ckps", W, N4)
        X = X + f.einsum("ijkp,ckps->cijs", self._ep, WN)
        Y3 = f.einsum("ckl,klip->cpi", W, self._ep)
        X = X - f.einsum("cpi,pjs->cijs", Y3, N4)
        return f.reduce(X).reshape(c, n * n, -1)

    def bracket(self, u, v):
        f = self.field
        A = self.algebra
        n = A.dim
        U = np.asarray(u).reshape(n, n)
        W = np.asarray(v).reshape(n, n)
        X = f.einsum("ij,kl,ikp,jlq->pq", U, W, A.mult, self.jacobi.table)
        EU = f.einsum("ij,ijkp->kp", U, self._ep)
        X = X + f.einsum("kp,kq->pq", EU, W)
        EW = f.einsum("kl,klip->ip", W, self._ep)
        X = X - f.einsum("ip,iq->pq", EW, U)
        return f.reduce(X).reshape(n * n)


class QuotientLR(LieRinehart):
    """``L / R`` for a relation subspace ``R`` that is an ideal killed by the anchor."""

    def __init__(self, parent: LieRinehart, relations: Subspace, provenance: str, names=None):
        self.parent = parent
        self.sq = Subquotient(parent.field, parent.dim, relations)
        self.module = QuotientModule(parent.module, self.sq, names)
        self.provenance = provenance
        self._cols = self.sq.lift_columns

    @property
    def relations(self) -> Subspace:
        return self.sq.relations

    def project(self, V) -> np.ndarray:
        return self.sq.project(V)

    def lift(self, C) -> np.ndarray:
        return self.sq.lift(C)

    @cached_property
    def anchor_tensor(self):
        return self.parent.anchor_tensor[self._cols]

    def _descend(self, X):
        return self.sq.project(X[:, :, self._cols].transpose(0, 2, 1)).transpose(0, 2, 1)

    def left_ad(self, V):
        return self._descend(self.parent.left_ad(self.lift(np.asarray(V))))

    def right_ad(self, V):
        return self._descend(self.parent.right_ad(self.lift(np.asarray(V))))

    def bracket(self, u, v):
        return self.project(self.parent.bracket(self.lift(u), self.lift(v)))


class AhTensor(QuotientLR):
    """``(A, Ah (x) A)``: the quotient of the tensor square by ``Ann(h) (x) A``.

    The class of ``e_i (x) e_j`` stands for ``h e_i (x) e_j``; the module
    generators are the classes of ``1 (x) e_j``, i.e. ``h (x) e_j``.
    """

    def __init__(self, parent: TensorSquare, relations: Subspace, h, ann: Subspace, provenance="ah-tensor"):
        A = parent.algebra
        self.h = h
        self.ann = ann
        self.jacobi = parent.jacobi
        names = None
        hname = A.format(h)
        if parent.dim:
            hn = hname if len(hname.split()) == 1 else f"({hname})"
            cols = Subquotient(parent.field, parent.dim, relations).lift_columns
            n = A.dim
            names = []
            for c in cols:
                i, j = divmod(int(c), n)
                left = hn if i == A.unit else f"{A.names[i]}*{hn}"
                names.append(f"{left}⊗{A.names[j]}")
        super().__init__(parent, relations, provenance, names)

    def generator(self, b) -> np.ndarray:
        """Class of ``h (x) b``."""
        A = self.algebra
        return self.project(self.parent.module.pure(A.one, b))

    def element(self, a, b) -> np.ndarray:
        """Class of ``a h (x) b``."""
        return self.project(self.parent.module.pure(a, b))

    def to_ambient(self, v) -> np.ndarray:
        """The element ``h * lift(v)`` of ``A (x) A``."""
        return self.parent.module.act_vec(self.h, self.lift(v)[None])[0]


class DerLR(TableLieRinehart):
    """``(A, Der(A))`` with the commutator bracket and identity anchor."""

    provenance = "derivations"

    def __init__(self, A: Algebra):
        f = A.field
        n = A.dim
        M = A.mult
        eye = f.eye(n)
        # unknown X[p, j] at index p*n + j; constraint rows (i, j, p)
        lhs = f.einsum("ijm,pP,mJ->ijpPJ", M, eye, eye)
        t1 = f.einsum("imp,mP,jJ->ijpPJ", M, eye, eye)
        t2 = f.einsum("mjp,mP,iJ->ijpPJ", M, eye, eye)
        system = f.reduce(lhs - t1 - t2).reshape(n ** 3, n * n)
        der = kernel(system, f)
        self.der_space = der
        d = der.dim
        mats = der.basis.reshape(d, n, n)
        act = f.zeros((n, d, d))
        for s in range(n):
            prod = f.einsum("pm,dmk->dpk", A.left_matrices[s], mats).reshape(d, n * n)
            act[s] = der.coordinates(prod).T
        comm = f.einsum("apm,bmk->abpk", mats, mats)
        comm = f.reduce(comm - comm.transpose(1, 0, 2, 3)).reshape(d, d, n * n)
        B = der.coordinates(comm)
        super().__init__(A, act, B, mats, provenance="derivations", names=[f"D{k}" for k in range(d)])


# -- constructions ---------------------------------------------------------------

def tensor_square(A: Algebra, J: JacobiBracket) -> TensorSquare:
    _check_algebra(A, J)
    return TensorSquare(J)


def _ideal_data(A: Algebra):
    """``I = ker(mu)`` and ``I^2`` inside ``A (x) A`` (cached on the algebra)."""
    cache = A.__dict__.setdefault("_jet_cache", {})
    if "I" not in cache:
        f = A.field
        n = A.dim
        mu = A.mult.reshape(n * n, n).T
        I = kernel(mu, f)
        u = A.unit
        d = f.zeros((n, n, n))  # d[b] = 1 (x) e_b - e_b (x) 1
        for b in range(n):
            d[b, u, b] = f(d[b, u, b] + 1)
            d[b, b, u] = f(d[b, b, u] - 1)
        # (e_a (x) 1) * d(e_b) * d(e_c); products in A (x) A are factorwise
        dd = f.einsum("bik,cjl,ijp,klq->bcpq", d, d, A.mult, A.mult)
        span = f.einsum("bcmq,amr->abcrq", dd, A.mult).reshape(n ** 3, n * n)
        cache["I"] = I
        cache["I2"] = Subspace.from_rows(f, n * n, span)
        cache["d"] = d.reshape(n, n * n)
    return cache


@dataclass
class KahlerDifferentials:
    """``Omega^1(A) = I / I^2`` with ``da`` the class of ``1 (x) a - a (x) 1``."""

    algebra: Algebra
    module: QuotientModule
    I: Subspace
    I2: Subspace
    d_images: np.ndarray

    @property
    def dim(self) -> int:
        return self.module.dim

    def d(self, a) -> np.ndarray:
        return self.module.sq.project(self.algebra.field.matmul(a, self.d_images))

    def project(self, v) -> np.ndarray:
        return self.module.sq.project(v)


def kahler_differentials(A: Algebra) -> KahlerDifferentials:
    data = _ideal_data(A)
    f = A.field
    n = A.dim
    sq = Subquotient(f, n * n, data["I2"], span=data["I"])
    module = QuotientModule(TensorSquareModule(A), sq)
    return KahlerDifferentials(A, module, data["I"], data["I2"], data["d"])


@dataclass
class JetData:
    """Bookkeeping for ``J^1(A) = (A (x) A) / I^2``."""

    algebra: Algebra
    structure: QuotientLR
    I: Subspace
    I2: Subspace
    omega: KahlerDifferentials

    def jet(self, a) -> np.ndarray:
        """``j^1(a)``, the class of ``1 (x) a``."""
        A = self.algebra
        return self.structure.project(self.structure.parent.module.pure(A.one, a))

    def split(self, v) -> tuple[np.ndarray, np.ndarray]:
        """``[sum a_i (x) b_i] -> (sum a_i b_i, sum a_i db_i)``."""
        A = self.algebra
        f = A.field
        n = A.dim
        w = self.structure.lift(v)
        prod = f.einsum("ij,ijk->k", w.reshape(n, n), A.mult)
        rest = f.reduce(w - self.structure.parent.module.pure(prod, A.one))
        return prod, self.omega.project(rest)

    def unsplit(self, a, omega) -> np.ndarray:
        A = self.algebra
        f = A.field
        w = f.reduce(self.structure.parent.module.pure(a, A.one) + self.omega.module.sq.lift(omega))
        return self.structure.project(w)

    def leibniz_residual(self, a, b) -> np.ndarray:
        """``j(ab) - a j(b) - b j(a) + ab j(1)``."""
        A = self.algebra
        f = A.field
        mod = self.structure.module
        ab = A.multiply(a, b)
        r = self.jet(ab) - mod.act_vec(a, self.jet(b)[None])[0] - mod.act_vec(b, self.jet(a)[None])[0]
        r = r + mod.act_vec(ab, self.jet(A.one)[None])[0]
        return f.reduce(r)


def jet_module(A: Algebra, J: JacobiBracket, descent: VerificationReport | None = None
               ) -> tuple[QuotientLR, JetData]:
    """``J^1(A) = (A (x) A) / I^2``; ``descent`` reuses an earlier ``jet_descent_check`` result."""
    _check_algebra(A, J)
    data = _ideal_data(A)
    L = TensorSquare(J)
    structure = QuotientLR(L, data["I2"], "jet")
    report = descent if descent is not None else jet_descent_check(A, J, _parent=L)
    if not report.passed:
        raise ConditionViolation(2, report.failing()[0].witnesses[:1], "the bracket does not descend to J^1(A)")
    return structure, JetData(A, structure, data["I"], data["I2"], kahler_differentials(A))


def jet_descent_check(A: Algebra, J: JacobiBracket, cap: int = 10, _parent: TensorSquare | None = None
                      ) -> VerificationReport:
    """Exhaustive: ``[v, w] in I^2`` for basis ``v`` of ``A (x) A`` and basis ``w`` of ``I^2``;
    ``rho(w) = 0`` for basis ``w`` of ``I^2``."""
    _check_algebra(A, J)
    f = A.field
    data = _ideal_data(A)
    I2 = data["I2"]
    L = _parent or TensorSquare(J)
    rep = VerificationReport("jet-descent")
    rep.add("I2_inside_I", [k for k, ok in enumerate(data["I"].contains_all(I2.basis)) if not ok] if I2.dim else [],
            cap=cap)
    bad = []
    total = 0
    N = I2.quotient_maps()[0].T  # v lies in I^2 iff v @ N = 0
    for sl in _chunks(I2.dim, 128):
        if N.shape[1] == 0:
            break
        X = L.right_ad_paired(I2.basis[sl], N)  # X[c, t] pairs [f_t, w_c] with N
        mask = f.nonzero_mask(X).any(axis=-1)
        for c, t in np.argwhere(mask):
            total += 1
            if len(bad) < cap:
                bad.append((L.module.names[t], f"I2[{sl.start + c}]"))
    rep.add("bracket_descends", bad, cap=cap, total=total)
    if I2.dim:
        RW = f.einsum("wt,tpk->wpk", I2.basis, L.anchor_tensor)
        rows = np.flatnonzero(f.nonzero_mask(RW).any(axis=(1, 2)))
    else:
        rows = []
    rep.add("anchor_kills_I2", [f"I2[{w}]" for w in rows], cap=cap)
    return rep


def quotient_by_h(L: LieRinehart, h, provenance: str = "quotient-by-h", cap: int = 10) -> QuotientLR:
    """``M = hL`` represented as ``L / K`` with ``K = ker(mu_h)``; both lemma conditions are checked."""
    f = L.field
    h = f.array(h)
    K = kernel(L.module.act_vec(h, f.eye(L.dim)).T, f) if L.dim else Subspace.zero(f, 0)
    _check_quotient_conditions(L, h, K)
    return QuotientLR(L, K, provenance)


def _check_quotient_conditions(L: LieRinehart, h, K: Subspace):
    f = L.field
    if K.dim == 0:
        return
    RK = f.einsum("kt,tpq->kpq", K.basis, L.anchor_tensor)
    bad = np.flatnonzero(f.nonzero_mask(RK).any(axis=(1, 2)))
    if len(bad):
        xi = K.basis[bad[0]]
        raise ConditionViolation(1, L.module.format(xi), f"rho({L.module.format(xi)}) != 0")
    if L.dim <= FULL_SCOPE_MAX_DIM:
        for sl in _chunks(K.dim):
            X = L.left_ad(K.basis[sl])  # [xi, f_t]
            HX = L.module.act_vec(h, X.transpose(0, 2, 1))
            hits = np.argwhere(f.nonzero_mask(HX).any(axis=-1))
            if len(hits):
                c, t = hits[0]
                xi = K.basis[sl.start + c]
                raise ConditionViolation(2, (L.module.format(xi), L.module.names[t]),
                                         f"h*[{L.module.format(xi)}, {L.module.names[t]}] != 0")
    else:
        # h [xi, a g] = a h [xi, g] once rho(xi) = 0, so generators suffice
        G = L.module.generators
        X = L.right_ad(G)  # [f_t, g]
        Y = f.einsum("gpt,kt->gkp", X, K.basis)
        HY = L.module.act_vec(h, Y)
        hits = np.argwhere(f.nonzero_mask(HY).any(axis=-1))
        if len(hits):
            g, k = hits[0]
            xi = K.basis[k]
            raise ConditionViolation(2, (L.module.format(xi), L.module.format(G[g])),
                                     f"h*[{L.module.format(xi)}, {L.module.format(G[g])}] != 0")


def ah_tensor_module(A: Algebra, J: JacobiBracket, h) -> AhTensor:
    _check_algebra(A, J)
    f = A.field
    h = f.array(h)
    ann = annihilator(A, [h])
    wit = ah_hypothesis_witnesses(J, ann.basis)
    if wit:
        r, i, j = wit[0]
        raise HypothesisViolation((r, i, j), f"({A.format(ann.basis[r])}) * {{{A.names[i]}, {A.names[j]}}} != 0")
    L = TensorSquare(J)
    n = A.dim
    rows = f.zeros((ann.dim * n, n * n))
    for k in range(ann.dim):
        for j in range(n):
            rows[k * n + j] = L.module.pure(ann.basis[k], f.unit_vector(n, j))
    K = Subspace.from_rows(f, n * n, rows)
    _check_quotient_conditions(L, h, K)
    return AhTensor(L, K, h, ann)


# -- verification ------------------------------------------------------------------

def verify_lie_rinehart(L: LieRinehart, cap: int = 10, full_max_dim: int = FULL_SCOPE_MAX_DIM
                        ) -> VerificationReport:
    """Module, anchor and bracket axioms.

    Up to ``full_max_dim`` every check runs over the full k-basis.  Above it the
    bracket and anchor checks run over the distinguished A-module generators;
    each defect involved is A-multilinear once the anchor takes values in
    derivations, which is itself checked on the full basis.
    """
    f = L.field
    A = L.algebra
    n = A.dim
    d = L.dim
    mod = L.module
    names = mod.names
    full = d <= full_max_dim
    scope = "full" if full else "generators"
    G = f.eye(d) if full else mod.generators
    gname = (lambda g: names[g]) if full else (lambda g: mod.format(G[g]))
    m = G.shape[0]
    R = L.anchor_tensor
    rep = VerificationReport(f"lie-rinehart[{L.provenance}]")

    AG = np.stack([mod.act_batch(s, G) for s in range(n)]) if m else f.zeros((n, 0, d))  # (s, g, d)

    # module axioms
    lhs = np.stack([mod.act_batch(s, AG[t]) for s in range(n) for t in range(n)]).reshape(n, n, m, d) \
        if m else f.zeros((n, n, 0, d))
    rhs = f.einsum("stm,mgq->stgq", A.mult, AG)
    bad = [(A.names[s], A.names[t], gname(g))
           for s, t, g in np.argwhere(f.nonzero_mask(f.reduce(lhs - rhs)).any(axis=-1))]
    unit_bad = [gname(g) for g in np.flatnonzero(f.nonzero_mask(f.reduce(AG[A.unit] - G)).any(axis=-1))]
    rep.add("module_action", bad + [("1", g) for g in unit_bad], scope=scope, cap=cap)
    span = Subspace.from_rows(f, d, AG.reshape(n * m, d)) if m else Subspace.zero(f, d)
    rep.add("generators_span", [] if span.dim == d else [f"rank {span.dim} < {d}"], cap=cap)

    # anchor values are derivations (full basis)
    bad = []
    for t in range(d):
        for (i, j) in leibniz_defects(A, R[t], limit=1):
            bad.append((names[t], A.names[i], A.names[j]))
    rep.add("anchor_in_derivations", bad, cap=cap)

    GL = L.left_ad(G) if m else f.zeros((0, d, d))  # GL[g][:, t] = [g, f_t]
    BG = f.einsum("gpt,ht->ghp", GL, G)  # [g, h]
    RG = f.einsum("gt,tpk->gpk", G, R)

    diag = f.nonzero_mask(BG[np.arange(m), np.arange(m)]).any(axis=-1)
    skew = f.nonzero_mask(f.reduce(BG + BG.transpose(1, 0, 2))).any(axis=-1)
    bad = [(gname(g), gname(g)) for g in np.flatnonzero(diag)]
    bad += [(gname(g), gname(h)) for g, h in np.argwhere(skew) if g < h]
    rep.add("alternating", bad, scope=scope, cap=cap)

    X = f.einsum("apt,bct->abcp", GL, BG)
    jac = f.reduce(X + X.transpose(1, 2, 0, 3) + X.transpose(2, 0, 1, 3))
    bad = [(gname(a), gname(b), gname(c)) for a, b, c in np.argwhere(f.nonzero_mask(jac).any(axis=-1))]
    rep.add("jacobi_identity", bad, scope=scope, cap=cap)

    lhs = f.einsum("ght,tpk->ghpk", BG, R)
    prod = f.einsum("gpm,hmk->ghpk", RG, RG)
    resid = f.reduce(lhs - prod + prod.transpose(1, 0, 2, 3))
    bad = [(gname(g), gname(h)) for g, h in np.argwhere(f.nonzero_mask(resid).any(axis=(-1, -2)))]
    rep.add("anchor_lie_hom", bad, scope=scope, cap=cap)

    lhs = f.einsum("sgt,tpk->sgpk", AG, R)
    rhs = f.einsum("spm,gmk->sgpk", A.left_matrices, RG)
    bad = [(A.names[s], gname(g)) for s, g in np.argwhere(f.nonzero_mask(f.reduce(lhs - rhs)).any(axis=(-1, -2)))]
    rep.add("anchor_A_linear", bad, scope=scope, cap=cap)

    lhs = f.einsum("gpt,sht->sghp", GL, AG)
    t1 = np.stack([mod.act_batch(s, BG.reshape(m * m, d)) for s in range(n)]).reshape(n, m, m, d) \
        if m else f.zeros((n, 0, 0, d))
    t2 = f.einsum("gps,phq->sghq", RG, AG)
    resid = f.reduce(lhs - t1 - t2)
    bad = [(gname(g), A.names[s], gname(h)) for s, g, h in np.argwhere(f.nonzero_mask(resid).any(axis=-1))]
    rep.add("leibniz_rule", bad, scope=scope, cap=cap)
    return rep
