"""Exact linear algebra over GF(p) and QQ.

Row reduction uses the leftmost nonzero column as pivot.  GF(2) rows are
packed into Python integers (bit ``j`` is column ``j``) so that elimination is
a sequence of XORs; every other field runs on dense rows of exact scalars.

Systems can be fed incrementally through :class:`Eliminator`, which is what
the connection solvers use to avoid materialising very tall matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .field import Field


class DimensionMismatch(ValueError):
    pass


# -- packing helpers for GF(2) -------------------------------------------------

def _pack_rows(arr: np.ndarray) -> list[int]:
    arr = np.asarray(arr)
    if arr.shape[0] == 0:
        return []
    if arr.shape[1] == 0:
        return [0] * arr.shape[0]
    bits = np.packbits((arr & 1).astype(np.uint8), axis=1, bitorder="little")
    return [int.from_bytes(row.tobytes(), "little") for row in bits]


def _unpack(x: int, ncols: int) -> np.ndarray:
    nbytes = (ncols + 7) // 8
    if nbytes == 0:
        return np.zeros(0, dtype=np.int64)
    raw = np.frombuffer(x.to_bytes(nbytes, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:ncols].astype(np.int64)


def _bits(x: int):
    while x:
        low = x & -x
        yield low.bit_length() - 1
        x ^= low


# -- certificates ---------------------------------------------------------------

@dataclass(frozen=True)
class InconsistencyCertificate:
    """``sum(c * row_i)`` vanishes on the coefficient side but not on the right side.

    ``row`` is the index of the equation whose reduction exposed ``0 = value``;
    ``combination`` lists ``(row_index, coefficient)`` pairs, sorted by index.
    """

    row: int
    combination: tuple[tuple[int, object], ...]
    value: object

    def check(self, field: Field, m, b) -> bool:
        m = field.array(m)
        b = field.array(b)
        lhs = field.zeros(m.shape[1])
        rhs = field.zero
        for i, c in self.combination:
            lhs = field.reduce(lhs + c * m[i])
            rhs = field(rhs + c * b[i])
        return field.is_zero(lhs) and rhs != 0

    def to_json(self, field: Field) -> dict:
        return {
            "row": self.row,
            "combination": [[i, field.to_json(c)] for i, c in self.combination],
            "value": field.to_json(self.value),
        }


# -- incremental elimination ----------------------------------------------------

class Eliminator:
    """Incremental Gaussian elimination of ``m x = b``.

    Rows are added with :meth:`add`; :meth:`result` returns the affine solution
    set.  With ``track=True`` each stored row carries the combination of input
    rows that produced it, which is how infeasibility certificates are built.
    """

    def __init__(self, field: Field, ncols: int, track: bool = False):
        self.field = field
        self.ncols = ncols
        self.track = track
        self.nrows = 0
        self.inconsistent: InconsistencyCertificate | None = None
        self._gf2 = field.characteristic == 2
        self._piv: dict[int, object] = {}
        self._comb: dict[int, object] = {}

    def add(self, rows, rhs=None, stop_on_inconsistent: bool = True) -> bool:
        """Add a block of rows; returns False once the system is known infeasible."""
        rows = np.asarray(rows)
        if rows.ndim == 1:
            rows = rows[None, :]
        if rows.shape[1] != self.ncols:
            raise DimensionMismatch(f"row width {rows.shape[1]} != {self.ncols}")
        k = rows.shape[0]
        if rhs is None:
            rhs = self.field.zeros(k)
        rhs = np.asarray(rhs).reshape(-1)
        if rhs.shape[0] != k:
            raise DimensionMismatch("right-hand side length does not match row count")
        if self._gf2:
            packed = _pack_rows(np.mod(rows.astype(np.int64), 2))
            top = 1 << self.ncols
            for r, (bits, c) in enumerate(zip(packed, np.mod(rhs.astype(np.int64), 2))):
                if c:
                    bits |= top
                if not self._add_gf2(bits, self.nrows + r) and stop_on_inconsistent:
                    self.nrows += r + 1
                    return False
        else:
            for r in range(k):
                row = [self.field(v) for v in rows[r]] + [self.field(rhs[r])]
                if not self._add_dense(row, self.nrows + r) and stop_on_inconsistent:
                    self.nrows += r + 1
                    return False
        self.nrows += k
        return self.inconsistent is None

    def _add_gf2(self, bits: int, index: int) -> bool:
        piv = self._piv
        comb = (1 << index) if self.track else 0
        while bits:
            low = (bits & -bits).bit_length() - 1
            row = piv.get(low)
            if row is None:
                break
            bits ^= row
            if self.track:
                comb ^= self._comb[low]
        if not bits:
            return True
        low = (bits & -bits).bit_length() - 1
        if low == self.ncols:
            if self.inconsistent is None:
                combination = tuple((i, 1) for i in _bits(comb)) if self.track else ()
                self.inconsistent = InconsistencyCertificate(index, combination, 1)
            return False
        piv[low] = bits
        if self.track:
            self._comb[low] = comb
        return True

    def _add_dense(self, row: list, index: int) -> bool:
        f = self.field
        n = self.ncols
        comb = {index: f.one} if self.track else None
        for c in range(n):
            v = row[c]
            if v == 0:
                continue
            prow = self._piv.get(c)
            if prow is None:
                inv = f.inv(v)
                row = [f(x * inv) for x in row]
                self._piv[c] = row
                if self.track:
                    self._comb[c] = {i: f(x * inv) for i, x in comb.items()}
                return True
            for j in range(c, n + 1):
                if prow[j] != 0:
                    row[j] = f(row[j] - v * prow[j])
            if self.track:
                for i, x in self._comb[c].items():
                    comb[i] = f(comb.get(i, f.zero) - v * x)
        if row[n] == 0:
            return True
        if self.inconsistent is None:
            combination = tuple(sorted((i, x) for i, x in comb.items() if x != 0)) if self.track else ()
            self.inconsistent = InconsistencyCertificate(index, combination, row[n])
        return False

    @property
    def rank(self) -> int:
        return len(self._piv)

    def _reduced_rows(self) -> tuple[list[int], np.ndarray, np.ndarray]:
        """Back-substitute to RREF; returns pivots, coefficient rows and rhs."""
        f = self.field
        pivots = sorted(self._piv)
        n = self.ncols
        if self._gf2:
            rows = dict(self._piv)
            pivmask = 0
            for c in reversed(pivots):
                r = rows[c]
                hits = (r >> (c + 1)) << (c + 1) & pivmask
                for b in _bits(hits):
                    r ^= rows[b]
                rows[c] = r
                pivmask |= 1 << c
            mat = np.array([_unpack(rows[c], n + 1) for c in pivots], dtype=np.int64).reshape(len(pivots), n + 1)
            return pivots, mat[:, :n], mat[:, n]
        rows = {c: list(self._piv[c]) for c in pivots}
        for idx in range(len(pivots) - 1, -1, -1):
            c = pivots[idx]
            r = rows[c]
            for c2 in pivots[idx + 1:]:
                v = r[c2]
                if v != 0:
                    r2 = rows[c2]
                    for j in range(c2, n + 1):
                        if r2[j] != 0:
                            r[j] = f(r[j] - v * r2[j])
        mat = f.zeros((len(pivots), n + 1))
        for k, c in enumerate(pivots):
            mat[k] = rows[c]
        return pivots, mat[:, :n], mat[:, n]

    def result(self) -> "AffineSubspace":
        f = self.field
        n = self.ncols
        if self.inconsistent is not None:
            return AffineSubspace(f, n, None, Subspace.zero(f, n), self.inconsistent)
        pivots, R, rhs = self._reduced_rows()
        particular = f.zeros(n)
        for k, c in enumerate(pivots):
            particular[c] = rhs[k]
        direction = Subspace.from_rows(f, n, _kernel_from_rref(f, n, pivots, R))
        return AffineSubspace(f, n, particular, direction, None)


def _kernel_from_rref(f: Field, n: int, pivots: Sequence[int], R: np.ndarray) -> np.ndarray:
    pivset = set(pivots)
    free = [c for c in range(n) if c not in pivset]
    K = f.zeros((len(free), n))
    for k, c in enumerate(free):
        K[k, c] = f.one
        for r, pc in enumerate(pivots):
            if R[r, c] != 0:
                K[k, pc] = f(-R[r, c])
    return K


# -- subspaces ------------------------------------------------------------------

class Subspace:
    """A subspace of ``field^ambient_dim`` stored as its unique RREF basis."""

    __slots__ = ("field", "ambient_dim", "basis", "pivots", "_pivot_index")

    def __init__(self, field: Field, ambient_dim: int, basis: np.ndarray, pivots: Sequence[int]):
        self.field = field
        self.ambient_dim = ambient_dim
        self.basis = basis
        self.pivots = tuple(pivots)
        self._pivot_index = np.array(self.pivots, dtype=np.int64)

    @classmethod
    def zero(cls, field: Field, n: int) -> "Subspace":
        return cls(field, n, field.zeros((0, n)), ())

    @classmethod
    def full(cls, field: Field, n: int) -> "Subspace":
        return cls(field, n, field.eye(n), range(n))

    @classmethod
    def from_rows(cls, field: Field, n: int, rows) -> "Subspace":
        rows = np.asarray(rows)
        if rows.size == 0:
            return cls.zero(field, n)
        rows = field.array(rows) if rows.dtype != field.dtype else rows
        if rows.ndim == 1:
            rows = rows[None, :]
        if rows.shape[1] != n:
            raise DimensionMismatch(f"vectors of length {rows.shape[1]} in ambient dimension {n}")
        R, pivots = rref(rows, field)
        return cls(field, n, R[: len(pivots)], pivots)

    span = from_rows

    @property
    def dim(self) -> int:
        return len(self.pivots)

    def __len__(self) -> int:
        return self.dim

    def __repr__(self) -> str:
        return f"Subspace(dim={self.dim}, ambient={self.ambient_dim}, field={self.field})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Subspace):
            return NotImplemented
        return (self.field == other.field and self.ambient_dim == other.ambient_dim
                and self.pivots == other.pivots and np.array_equal(self.basis, other.basis))

    def __hash__(self):
        return hash((self.field, self.ambient_dim, self.pivots))

    def _check(self, v: np.ndarray):
        if v.shape[-1] != self.ambient_dim:
            raise DimensionMismatch(f"vector length {v.shape[-1]} != ambient dimension {self.ambient_dim}")

    def reduce(self, v) -> np.ndarray:
        """Canonical coset representative: zero at every pivot column."""
        v = self.field.array(v) if not isinstance(v, np.ndarray) or v.dtype != self.field.dtype else v
        self._check(v)
        if self.dim == 0:
            return v.copy()
        coeffs = v[..., self._pivot_index]
        return self.field.reduce(v - self.field.matmul(coeffs, self.basis))

    def contains(self, v) -> bool:
        return self.field.is_zero(self.reduce(v))

    def contains_all(self, rows) -> np.ndarray:
        """Boolean mask: which rows lie in the subspace."""
        red = self.reduce(rows)
        return ~self.field.nonzero_mask(red).any(axis=-1)

    __contains__ = contains

    def coordinates(self, v) -> np.ndarray:
        """Coefficients with respect to ``basis`` (caller guarantees membership)."""
        v = np.asarray(v)
        return v[..., self._pivot_index]

    def is_subspace_of(self, other: "Subspace") -> bool:
        return self.dim == 0 or bool(other.contains_all(self.basis).all())

    def __add__(self, other: "Subspace") -> "Subspace":
        _same_ambient(self, other)
        return Subspace.from_rows(self.field, self.ambient_dim, np.concatenate([self.basis, other.basis]))

    def intersect(self, other: "Subspace") -> "Subspace":
        return intersect([self, other])

    @property
    def complement_columns(self) -> tuple[int, ...]:
        piv = set(self.pivots)
        return tuple(c for c in range(self.ambient_dim) if c not in piv)

    def quotient_maps(self) -> tuple[np.ndarray, np.ndarray]:
        """Projection ``P`` (ambient -> quotient coords) and section ``S`` (coords -> ambient).

        Quotient coordinates are the entries of the canonical representative at
        the non-pivot columns, so ``P @ S`` is the identity.
        """
        f = self.field
        n = self.ambient_dim
        free = list(self.complement_columns)
        P = f.zeros((len(free), n))
        S = f.zeros((n, len(free)))
        for k, c in enumerate(free):
            P[k, c] = f.one
            S[c, k] = f.one
        if self.dim:
            P[:, list(self.pivots)] = f.reduce(-self.basis[:, free].T)
        return P, S


def _same_ambient(a: Subspace, b: Subspace):
    if a.ambient_dim != b.ambient_dim or a.field != b.field:
        raise DimensionMismatch("subspaces live in different ambient spaces")


@dataclass
class AffineSubspace:
    """Either empty (with a certificate) or ``particular + direction``.

    Solver results use the canonical particular solution whose free variables
    (the non-pivot columns of the reduced system) are all zero.
    """

    field: Field
    ambient_dim: int
    particular: np.ndarray | None
    direction: Subspace
    certificate: InconsistencyCertificate | None = None

    @property
    def is_empty(self) -> bool:
        return self.particular is None

    def __bool__(self) -> bool:
        return not self.is_empty

    @property
    def dim(self) -> int:
        return -1 if self.is_empty else self.direction.dim

    def contains(self, v) -> bool:
        if self.is_empty:
            return False
        v = self.field.array(v) if not isinstance(v, np.ndarray) or v.dtype != self.field.dtype else v
        return self.direction.contains(self.field.reduce(v - self.particular))

    __contains__ = contains

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        if self.is_empty:
            raise ValueError("empty affine subspace")
        c = self.field.random(rng, self.direction.dim)
        return self.field.reduce(self.particular + self.field.matmul(c, self.direction.basis))


# -- operations -----------------------------------------------------------------

def rref(m, field: Field) -> tuple[np.ndarray, tuple[int, ...]]:
    """Reduced row echelon form (same shape as ``m``) and its pivot columns."""
    m = field.array(m) if not isinstance(m, np.ndarray) or m.dtype != field.dtype else m
    if m.ndim != 2:
        raise DimensionMismatch("rref expects a matrix")
    rows, cols = m.shape
    el = Eliminator(field, cols)
    el.add(m)
    pivots, R, _ = el._reduced_rows()
    out = field.zeros((rows, cols))
    out[: len(pivots)] = R
    return out, tuple(pivots)


def rank(m, field: Field) -> int:
    return len(rref(m, field)[1])


def solve_affine(m, b, field: Field) -> AffineSubspace:
    """All ``x`` with ``m x = b``.  Empty results carry an inconsistency certificate."""
    m = field.array(m) if not isinstance(m, np.ndarray) or m.dtype != field.dtype else m
    b = field.array(b) if not isinstance(b, np.ndarray) or b.dtype != field.dtype else b
    if m.ndim != 2 or b.shape != (m.shape[0],):
        raise DimensionMismatch(f"matrix {m.shape} incompatible with right side {b.shape}")
    el = Eliminator(field, m.shape[1])
    if el.add(m, b):
        return el.result()
    return certify(field, m, b)


def certify(field: Field, m, b) -> AffineSubspace:
    """Rerun an infeasible system with row tracking to produce the certificate."""
    m = np.asarray(m)
    el = Eliminator(field, m.shape[1], track=True)
    el.add(m, b)
    if el.inconsistent is None:
        raise AssertionError("system reported infeasible but re-elimination is consistent")
    return el.result()


def kernel(m, field: Field) -> Subspace:
    m = field.array(m) if not isinstance(m, np.ndarray) or m.dtype != field.dtype else m
    if m.ndim != 2:
        raise DimensionMismatch("kernel expects a matrix")
    n = m.shape[1]
    if m.shape[0] == 0:
        return Subspace.full(field, n)
    R, pivots = rref(m, field)
    return Subspace.from_rows(field, n, _kernel_from_rref(field, n, pivots, R[: len(pivots)]))


def column_space(m, field: Field) -> Subspace:
    m = np.asarray(m)
    return Subspace.from_rows(field, m.shape[0], m.T)


def intersect(spaces: Sequence[Subspace]) -> Subspace:
    if not spaces:
        raise ValueError("intersect needs at least one subspace")
    result = spaces[0]
    for s in spaces[1:]:
        _same_ambient(result, s)
        if result.dim == 0 or s.dim == 0:
            result = Subspace.zero(result.field, result.ambient_dim)
            continue
        f = result.field
        stacked = np.concatenate([result.basis, s.basis])
        coeffs = kernel(stacked.T, f)
        if coeffs.dim == 0:
            result = Subspace.zero(f, result.ambient_dim)
        else:
            vecs = f.matmul(coeffs.basis[:, : result.dim], result.basis)
            result = Subspace.from_rows(f, result.ambient_dim, vecs)
    return result


def membership(v, s: Subspace | AffineSubspace) -> bool:
    return s.contains(v)


def affine_span(field: Field, point, direction: Subspace) -> AffineSubspace:
    """``point + direction`` with the same canonical representative a solver would return."""
    n = direction.ambient_dim
    point = field.array(point) if not isinstance(point, np.ndarray) or point.dtype != field.dtype else point
    if direction.dim == 0:
        return AffineSubspace(field, n, point.copy(), direction, None)
    constraints = kernel(direction.basis, field)
    el = Eliminator(field, n)
    if constraints.dim:
        el.add(constraints.basis, field.matmul(constraints.basis, point))
    return el.result()


# -- serialisation --------------------------------------------------------------

def vector_to_json(field: Field, v) -> list:
    return [field.to_json(c) for c in np.asarray(v).reshape(-1)]


def subspace_to_json(s: Subspace) -> dict:
    return {
        "ambient_dim": s.ambient_dim,
        "dim": s.dim,
        "pivots": list(s.pivots),
        "basis": [vector_to_json(s.field, row) for row in s.basis],
    }


def affine_to_json(s: AffineSubspace) -> dict:
    if s.is_empty:
        return {"empty": True, "certificate": s.certificate.to_json(s.field) if s.certificate else None}
    return {
        "empty": False,
        "particular": vector_to_json(s.field, s.particular),
        "direction_dim": s.direction.dim,
    }
