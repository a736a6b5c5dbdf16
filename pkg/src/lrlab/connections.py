"""Right connection characters on ``A``, curvature, obstructions and the antipode verdict.

A right connection character of a Lie-Rinehart pair ``(A, L)`` is a k-linear
map ``delta: L -> A`` with ``delta(a xi) = a delta(xi) - rho(xi)(a)``.  It is
stored as a ``dim(L) x dim(A)`` matrix whose row ``q`` is ``delta(f_q)``; in
every linear system the unknown for entry ``(q, p)`` sits at ``q * dim(A) + p``.

On ``(A, Ah (x) A)`` connections are parametrised by maps ``D: A -> A`` with
``r D(a) = {a, r}`` for ``r`` in ``Ann(h)``, stored column-wise
(``matrix[:, a] = D(e_a)``, unknown ``(p, a)`` at ``p * dim(A) + a``).  That
system has ``dim(A)^2`` unknowns instead of ``dim(L) dim(A)`` and is the
default solver there; the generic system serves as cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Iterator

import numpy as np

from .algebra import Algebra, AlgebraMismatch, annihilator
from .jacobi import JacobiBracket, ah_hypothesis_witnesses
from .lie_rinehart import (
    FULL_SCOPE_MAX_DIM,
    AhTensor,
    HypothesisViolation,
    LieRinehart,
    QuotientLR,
    TensorSquare,
    _chunks,
    _ideal_data,
    jet_module,
    verify_lie_rinehart,
)
from .linalg import (
    AffineSubspace,
    Eliminator,
    Subspace,
    affine_span,
    column_space,
    kernel,
    rref,
    solve_affine,
    subspace_to_json,
    vector_to_json,
)
from .verification import VerificationReport

GENERIC_CROSS_CHECK_MAX_DIM = 12
_BLOCK_ENTRIES = 1 << 23

OBSTRUCTED, UNOBSTRUCTED = "obstructed", "unobstructed"


class ConnectionAxiomViolation(ValueError):
    def __init__(self, report: VerificationReport):
        check = report.failing()[0]
        super().__init__(f"connection axiom fails, e.g. at {check.witnesses[:1]}")
        self.report = report


class DeeInvariantViolation(ValueError):
    def __init__(self, witness: tuple[str, str]):
        super().__init__(f"r * D(a) != {{a, r}} for (r, a) = {witness}")
        self.witness = witness


class WellDefinednessError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


class UnverifiedStructure(ValueError):
    pass


class InternalInconsistency(RuntimeError):
    """Two independent computations disagree; this signals a bug, never a valid answer."""


def _check_pair(A: Algebra, J: JacobiBracket):
    if J.algebra is not A:
        raise AlgebraMismatch("bracket belongs to a different algebra")
    J.require_valid()


# -- connection characters ---------------------------------------------------------

class ConnectionCharacter:
    def __init__(self, structure: LieRinehart, matrix: np.ndarray, source: str = "raw"):
        matrix = np.asarray(matrix)
        shape = (structure.dim, structure.algebra.dim)
        if matrix.shape != shape:
            raise ValueError(f"connection matrix has shape {matrix.shape}, expected {shape}")
        self.structure = structure
        self.matrix = matrix
        self.source = source
        self._axiom: VerificationReport | None = None

    def __repr__(self) -> str:
        return f"ConnectionCharacter({self.source}, {self.structure!r})"

    def __call__(self, xi) -> np.ndarray:
        return self.structure.field.matmul(np.asarray(xi), self.matrix)

    def axiom_report(self) -> VerificationReport:
        if self._axiom is None:
            self._axiom = connection_axiom_check(self.structure, self.matrix)
        return self._axiom

    def require_axiom(self):
        rep = self.axiom_report()
        if not rep.passed:
            raise ConnectionAxiomViolation(rep)

    def to_json(self) -> dict:
        L = self.structure
        A = L.algebra
        return {
            "source": self.source,
            "values": {L.module.names[q]: A.format(self.matrix[q]) for q in range(L.dim)},
        }


def _delta_matrix(L: LieRinehart, delta) -> np.ndarray:
    if isinstance(delta, ConnectionCharacter):
        if delta.structure is not L:
            raise ValueError("connection character belongs to a different structure")
        return delta.matrix
    D = np.asarray(delta)
    shape = (L.dim, L.algebra.dim)
    if D.shape != shape:
        raise ValueError(f"connection matrix has shape {D.shape}, expected {shape}")
    return D


def _as_connection(L: LieRinehart, delta) -> ConnectionCharacter:
    if isinstance(delta, ConnectionCharacter):
        _delta_matrix(L, delta)
        return delta
    return ConnectionCharacter(L, _delta_matrix(L, delta))


def connection_axiom_check(L: LieRinehart, delta, cap: int = 10) -> VerificationReport:
    """Residuals ``delta(a xi) - a delta(xi) + rho(xi)(a)`` over all basis pairs ``(a, xi)``."""
    D = _delta_matrix(L, delta)
    f = L.field
    A = L.algebra
    rep = VerificationReport("connection")
    if L.dim == 0:
        rep.add("connection_axiom", [], cap=cap)
        return rep
    lhs = f.einsum("std,dp->stp", L.action_rows, D)
    mid = f.einsum("tq,spq->stp", D, A.left_matrices)
    resid = f.reduce(lhs - mid + L.anchor_tensor.transpose(2, 0, 1))
    bad = [(A.names[s], L.module.names[t]) for s, t in np.argwhere(f.nonzero_mask(resid).any(axis=-1))]
    rep.add("connection_axiom", bad, cap=cap)
    return rep


def _curvature_rows(L: LieRinehart, D, U, V, B) -> np.ndarray:
    """``C(u_c, v_c)`` at ``1`` for rows ``U, V`` with brackets ``B``."""
    f = L.field
    R = L.anchor_tensor
    RU = f.einsum("ct,tpk->cpk", U, R)
    RV = f.einsum("ct,tpk->cpk", V, R)
    dU = f.matmul(U, D)
    dV = f.matmul(V, D)
    return f.reduce(-f.einsum("cpk,ck->cp", RU, dV) + f.einsum("cpk,ck->cp", RV, dU) + f.matmul(B, D))


def curvature(L: LieRinehart, delta, xi, zeta, at=None) -> np.ndarray:
    """``C(xi, zeta) = -rho(xi)(delta zeta) + rho(zeta)(delta xi) + delta([xi, zeta])``.

    The value is taken at ``1``; passing ``at=c`` multiplies it by ``c``.
    """
    conn = _as_connection(L, delta)
    conn.require_axiom()
    f = L.field
    xi = np.asarray(xi)
    zeta = np.asarray(zeta)
    B = L.bracket(xi, zeta)
    value = _curvature_rows(L, conn.matrix, xi[None], zeta[None], B[None])[0]
    if at is not None:
        value = L.algebra.multiply(f.array(at), value)
    return value


def _scope(L: LieRinehart, scope: str) -> str:
    if scope == "auto":
        return "full" if L.dim <= FULL_SCOPE_MAX_DIM else "generators"
    if scope not in ("full", "generators"):
        raise ValueError(f"unknown scope {scope!r}")
    return scope


def _pairs(L: LieRinehart, scope: str) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray, list]]:
    """Chunks ``(U, V, [U, V], labels)`` over basis pairs ``i < j`` or generator pairs."""
    f = L.field
    d = L.dim
    names = L.module.names
    if scope == "full":
        eye = f.eye(d)
        for sl in _chunks(d):
            GL = L.left_ad(eye[sl])  # GL[c][:, t] = [f_i, f_t]
            ci, jj = np.nonzero(np.arange(d)[None, :] > np.arange(sl.start, sl.stop)[:, None])
            if len(ci) == 0:
                continue
            B = GL.transpose(0, 2, 1)[ci, jj]
            labels = [(names[sl.start + c], names[j]) for c, j in zip(ci, jj)]
            yield eye[sl.start + ci], eye[jj], B, labels
    else:
        G = L.module.generators
        m = G.shape[0]
        if m < 2:
            return
        GL = L.left_ad(G)
        gi, gj = np.triu_indices(m, 1)
        B = f.einsum("cpt,ct->cp", GL[gi], G[gj])
        labels = [(L.module.format(G[a]), L.module.format(G[b])) for a, b in zip(gi, gj)]
        yield G[gi], G[gj], B, labels


def curvature_check(L: LieRinehart, delta, scope: str = "auto", cap: int = 10) -> VerificationReport:
    """Zero curvature on basis pairs (``full``) or on generator pairs (``generators``).

    Curvature is A-bilinear for any connection character, so the generator
    scope decides flatness as well once the axiom holds.
    """
    conn = _as_connection(L, delta)
    conn.require_axiom()
    f = L.field
    scope = _scope(L, scope)
    bad = []
    total = 0
    for U, V, B, labels in _pairs(L, scope):
        C = _curvature_rows(L, conn.matrix, U, V, B)
        for c in np.flatnonzero(f.nonzero_mask(C).any(axis=-1)):
            total += 1
            if len(bad) < cap:
                bad.append(labels[c] + (L.algebra.format(C[c]),))
    rep = VerificationReport("curvature")
    rep.add("curvature_zero", bad, scope=scope, cap=cap, total=total)
    return rep


# -- linear systems ------------------------------------------------------------------

Blocks = Callable[[], Iterator[tuple[np.ndarray, np.ndarray]]]


def _run_blocks(field, ncols: int, blocks: Blocks) -> AffineSubspace:
    """Solve a system fed block by block; an infeasible run is repeated with row tracking."""
    el = Eliminator(field, ncols)
    for rows, rhs in blocks():
        if not el.add(rows, rhs):
            tracked = Eliminator(field, ncols, track=True)
            for rows2, rhs2 in blocks():
                if not tracked.add(rows2, rhs2):
                    break
            return tracked.result()
    return el.result()


def materialize(blocks: Blocks) -> tuple[np.ndarray, np.ndarray]:
    """Stack a block system into one matrix and right side (for audits of small systems)."""
    parts = list(blocks())
    return np.concatenate([r for r, _ in parts]), np.concatenate([b for _, b in parts])


def _chain(*sources: Blocks) -> Blocks:
    def run():
        for src in sources:
            yield from src()
    return run


def connection_axiom_blocks(L: LieRinehart) -> Blocks:
    """Rows ``(t, p)`` of ``delta(e_s f_t) - e_s delta(f_t) = -rho(f_t)(e_s)``, blocked by ``s`` and ``t``."""
    f = L.field
    A = L.algebra
    n = A.dim
    d = L.dim
    step = max(1, _BLOCK_ENTRIES // (n * d * n)) if d else 1

    def run():
        if d == 0:
            return
        In = f.eye(n)
        Id = f.eye(d)
        R = L.anchor_tensor
        AR = L.action_rows
        for s in range(n):
            for sl in _chunks(d, step):
                k = sl.stop - sl.start
                blk = f.einsum("tq,pP->tpqP", AR[s][sl], In) - f.einsum("tq,pP->tpqP", Id[sl], A.left_matrices[s])
                yield f.reduce(blk).reshape(k * n, d * n), f.reduce(-R[sl, :, s]).reshape(k * n)

    return run


def curvature_blocks(L: LieRinehart, scope: str = "auto") -> Blocks:
    """Rows ``(pair, p)`` of ``-rho(u)(delta v) + rho(v)(delta u) + delta([u, v]) = 0``."""
    f = L.field
    n = L.algebra.dim
    d = L.dim
    scope = _scope(L, scope)

    def run():
        In = f.eye(n)
        R = L.anchor_tensor
        for U, V, B, _ in _pairs(L, scope):
            c = U.shape[0]
            RU = f.einsum("ct,tpk->cpk", U, R)
            RV = f.einsum("ct,tpk->cpk", V, R)
            blk = (f.einsum("cq,cpP->cpqP", U, RV) - f.einsum("cq,cpP->cpqP", V, RU)
                   + f.einsum("cq,pP->cpqP", B, In))
            yield f.reduce(blk).reshape(c * n, d * n), f.zeros(c * n)

    return run


@dataclass
class _GeneratorChart:
    """``delta`` as an affine function of its values ``x`` on the module generators.

    With generators ``g`` spanning ``L`` over ``A``, any choice of ``x[g] = delta(g)``
    extends to ``sum c_gs e_s g -> sum c_gs (e_s x[g] - rho(g)(e_s))``, which obeys
    the axiom on the free module; it descends to ``L`` exactly when it vanishes on
    the relations among the ``e_s g``.  Unknown ``(g, p)`` sits at ``g * dim(A) + p``.
    """

    ncols: int
    T: np.ndarray  # (d, n, m*n): delta(f_t)_p = T[t, p] . x + t0[t, p]
    t0: np.ndarray  # (d, n)
    relations: np.ndarray  # coefficient vectors c with sum c_gs e_s g = 0
    extend: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


def _generator_chart(L: LieRinehart) -> _GeneratorChart | None:
    f = L.field
    A = L.algebra
    n = A.dim
    d = L.dim
    G = L.module.generators
    m = G.shape[0]
    if d == 0 or m == 0 or m >= d:
        return None
    P = np.stack([L.module.act_batch(s, G) for s in range(n)], axis=1).reshape(m * n, d)
    R, piv = rref(np.concatenate([P, f.eye(m * n)], axis=1), f)
    if tuple(piv[:d]) != tuple(range(d)):
        return None  # the generators do not span L
    C = R[:, d:]
    RG = f.einsum("gt,tpk->gpk", G, L.anchor_tensor)

    def extend(Cs):
        k = Cs.shape[0]
        C3 = Cs.reshape(k, m, n)
        lin = f.einsum("kgs,sqp->kpgq", C3, A.mult).reshape(k, n, m * n)
        return lin, f.reduce(-f.einsum("kgs,gps->kp", C3, RG))

    T, t0 = extend(C[:d])
    return _GeneratorChart(m * n, T, t0, C[d:], extend)


def _chart_relation_blocks(L: LieRinehart, chart: _GeneratorChart, step: int = 256) -> Blocks:
    """Rows ``(c, p)`` saying that the extension vanishes on each relation ``c``."""
    f = L.field

    def run():
        for sl in _chunks(chart.relations.shape[0], step):
            lin, const = chart.extend(chart.relations[sl])
            yield lin.reshape(-1, chart.ncols), f.reduce(-const).reshape(-1)

    return run


def _chart_curvature_blocks(L: LieRinehart, chart: _GeneratorChart, scope: str) -> Blocks:
    f = L.field
    n = L.algebra.dim
    scope = _scope(L, scope)

    def run():
        R = L.anchor_tensor
        for U, V, B, _ in _pairs(L, scope):
            c = U.shape[0]
            RU = f.einsum("ct,tpk->cpk", U, R)
            RV = f.einsum("ct,tpk->cpk", V, R)
            dU, dV, dB = (f.einsum("ct,tpx->cpx", W, chart.T) for W in (U, V, B))
            cU, cV, cB = (f.matmul(W, chart.t0) for W in (U, V, B))
            lin = -f.einsum("cpk,ckx->cpx", RU, dV) + f.einsum("cpk,ckx->cpx", RV, dU) + dB
            const = -f.einsum("cpk,ck->cp", RU, cV) + f.einsum("cpk,ck->cp", RV, cU) + cB
            yield f.reduce(lin).reshape(c * n, chart.ncols), f.reduce(-const).reshape(c * n)

    return run


def _chart_image(L: LieRinehart, chart: _GeneratorChart, X: AffineSubspace) -> AffineSubspace:
    f = L.field
    ncols = L.dim * L.algebra.dim
    if X.is_empty:
        return AffineSubspace(f, ncols, None, Subspace.zero(f, ncols), X.certificate)
    T2 = chart.T.reshape(ncols, chart.ncols)
    point = f.reduce(f.matmul(T2, X.particular) + chart.t0.reshape(ncols))
    if X.direction.dim:
        direction = Subspace.from_rows(f, ncols, f.matmul(X.direction.basis, T2.T))
    else:
        direction = Subspace.zero(f, ncols)
    return affine_span(f, point, direction)


def solve_connection_generic(L: LieRinehart, use_generators: bool = True) -> AffineSubspace:
    """All connection characters, as ``dim(L) * dim(A)``-vectors (row-major matrices).

    When the module generators span ``L`` the system is solved for the values on
    the generators (see :class:`_GeneratorChart`); otherwise, or with
    ``use_generators=False``, for the full matrix.
    """
    chart = _generator_chart(L) if use_generators else None
    if chart is None:
        return _run_blocks(L.field, L.dim * L.algebra.dim, connection_axiom_blocks(L))
    return _chart_image(L, chart, _run_blocks(L.field, chart.ncols, _chart_relation_blocks(L, chart)))


def solve_flat_connection(L: LieRinehart, method: str = "auto", scope: str = "auto",
                          use_generators: bool = True) -> AffineSubspace:
    """All flat connection characters.

    ``method="auto"`` uses the D-parametrisation on ``Ah (x) A`` structures and
    the generic axiom-plus-curvature system everywhere else.  On the D path an
    empty result carries the certificate of the D system.
    """
    if method not in ("auto", "generic", "dee"):
        raise ValueError(f"unknown method {method!r}")
    if method == "dee" or (method == "auto" and isinstance(L, AhTensor)):
        if not isinstance(L, AhTensor):
            raise ValueError("the D-parametrisation needs an Ah (x) A structure")
        return _flat_via_dee(L)
    chart = _generator_chart(L) if use_generators else None
    if chart is None:
        blocks = _chain(connection_axiom_blocks(L), curvature_blocks(L, scope))
        return _run_blocks(L.field, L.dim * L.algebra.dim, blocks)
    blocks = _chain(_chart_relation_blocks(L, chart), _chart_curvature_blocks(L, chart, scope))
    return _chart_image(L, chart, _run_blocks(L.field, chart.ncols, blocks))


def connection_from_vector(L: LieRinehart, v, source: str = "solver") -> ConnectionCharacter:
    return ConnectionCharacter(L, np.asarray(v).reshape(L.dim, L.algebra.dim), source)


# -- the D-parametrisation on Ah (x) A ---------------------------------------------------

class DeeMap:
    """A k-linear map ``D: A -> A`` with ``matrix[:, a] = D(e_a)``, tied to ``(J, h)``."""

    def __init__(self, jacobi: JacobiBracket, h, matrix):
        A = jacobi.algebra
        matrix = np.asarray(matrix)
        if matrix.shape != (A.dim, A.dim):
            raise ValueError(f"D matrix has shape {matrix.shape}, expected {(A.dim, A.dim)}")
        self.jacobi = jacobi
        self.algebra = A
        self.h = A.field.array(h)
        self.matrix = matrix

    @classmethod
    def from_vector(cls, jacobi: JacobiBracket, h, v) -> "DeeMap":
        n = jacobi.algebra.dim
        return cls(jacobi, h, np.asarray(v).reshape(n, n))

    def __call__(self, a) -> np.ndarray:
        return self.algebra.field.matmul(self.matrix, np.asarray(a))

    def defects(self, ann: Subspace | None = None) -> list[tuple[str, str]]:
        """Pairs ``(r, a)`` with ``r D(e_a) != {e_a, r}``."""
        A = self.algebra
        f = A.field
        ann = annihilator(A, [self.h]) if ann is None else ann
        if ann.dim == 0:
            return []
        Lr = f.einsum("rs,spq->rpq", ann.basis, A.left_matrices)
        lhs = f.einsum("rpq,qa->rap", Lr, self.matrix)
        rhs = f.einsum("rm,amp->rap", ann.basis, self.jacobi.table)
        mask = f.nonzero_mask(f.reduce(lhs - rhs)).any(axis=-1)
        return [(A.format(ann.basis[r]), A.names[a]) for r, a in np.argwhere(mask)]

    def require_valid(self):
        bad = self.defects()
        if bad:
            raise DeeInvariantViolation(bad[0])


def _ann_checked(A: Algebra, J: JacobiBracket, h) -> Subspace:
    _check_pair(A, J)
    ann = annihilator(A, [A.field.array(h)])
    wit = ah_hypothesis_witnesses(J, ann.basis)
    if wit:
        r, i, j = wit[0]
        raise HypothesisViolation((r, i, j), f"({A.format(ann.basis[r])}) * {{{A.names[i]}, {A.names[j]}}} != 0")
    return ann


def dee_constraint_blocks(A: Algebra, J: JacobiBracket, ann: Subspace) -> Blocks:
    """Rows ``(a, p)`` of ``r D(e_a) = {e_a, r}``, one block per basis vector ``r`` of ``Ann(h)``."""
    f = A.field
    n = A.dim

    def run():
        In = f.eye(n)
        for r in ann.basis:
            Lr = A.left(r)
            blk = f.einsum("aA,pP->apPA", In, Lr).reshape(n * n, n * n)
            rhs = f.einsum("m,amp->ap", r, J.table).reshape(n * n)
            yield blk, rhs

    return run


def dee_curvature_blocks(A: Algebra, J: JacobiBracket) -> Blocks:
    """Rows ``(a, b, p)``, ``a < b``, of the curvature of ``D`` on generator pairs ``(h e_a, h e_b)``."""
    f = A.field
    n = A.dim

    def run():
        In = f.eye(n)
        T = J.table
        E = T[A.unit]
        LE = f.einsum("bm,mpq->bpq", E, A.left_matrices)
        for a in range(n - 1):
            ea = In[a]
            blk = (f.einsum("pP,bc->bpPc", In, T[a])
                   - f.einsum("Pp,bc->bpPc", T[a], In)
                   - f.einsum("Pbp,c->bpPc", T, ea)
                   - f.einsum("pP,bc->bpPc", LE[a], In)
                   + f.einsum("bpP,c->bpPc", LE, ea))
            blk = f.reduce(blk[a + 1:])
            yield blk.reshape((n - a - 1) * n, n * n), f.zeros((n - a - 1) * n)

    return run


def dee_solution_space(A: Algebra, J: JacobiBracket, h) -> AffineSubspace:
    """All ``D`` with ``r D(a) = {a, r}`` for ``r`` in ``Ann(h)``, as row-major ``n x n`` vectors."""
    ann = _ann_checked(A, J, h)
    return _run_blocks(A.field, A.dim ** 2, dee_constraint_blocks(A, J, ann))


def solve_flat_dee(A: Algebra, J: JacobiBracket, h) -> AffineSubspace:
    """The members of :func:`dee_solution_space` whose connection is flat."""
    ann = _ann_checked(A, J, h)
    blocks = _chain(dee_constraint_blocks(A, J, ann), dee_curvature_blocks(A, J))
    return _run_blocks(A.field, A.dim ** 2, blocks)


def _dee_affine_map(L: AhTensor):
    """``D -> delta`` on the basis classes ``e_i h (x) e_j``: linear part and constant."""
    A = L.algebra
    f = A.field
    n = A.dim
    T = L.jacobi.table
    I, Jc = np.divmod(np.asarray(L.sq.lift_columns, dtype=np.int64), n)
    Li = A.left_matrices[I]
    const = f.reduce(T[I, Jc] - f.einsum("kpq,kq->kp", Li, T[A.unit][Jc]))

    def linear(Ds: np.ndarray) -> np.ndarray:
        return f.einsum("kpq,mqk->mkp", Li, Ds[:, :, Jc])

    return linear, const


def connection_from_dee(D: DeeMap, L: AhTensor | None = None) -> ConnectionCharacter:
    """``delta(a h (x) b) = a D(b) + {a, b} - a {1, b}``."""
    D.require_valid()
    if L is None:
        from .lie_rinehart import ah_tensor_module

        L = ah_tensor_module(D.algebra, D.jacobi, D.h)
    if not isinstance(L, AhTensor) or L.jacobi is not D.jacobi or not np.array_equal(L.h, D.h):
        raise ValueError("structure does not match the D map")
    linear, const = _dee_affine_map(L)
    delta = L.field.reduce(linear(D.matrix[None])[0] + const)
    return ConnectionCharacter(L, delta, "dee")


def dee_space_to_connections(L: AhTensor, S: AffineSubspace) -> AffineSubspace:
    """Image of an affine set of D maps under the (injective) map to connection characters."""
    f = L.field
    n = L.algebra.dim
    ncols = L.dim * n
    if S.is_empty:
        return AffineSubspace(f, ncols, None, Subspace.zero(f, ncols), S.certificate)
    linear, const = _dee_affine_map(L)
    point = f.reduce(linear(S.particular.reshape(1, n, n))[0] + const).reshape(ncols)
    if S.direction.dim:
        rows = linear(S.direction.basis.reshape(-1, n, n)).reshape(-1, ncols)
        direction = Subspace.from_rows(f, ncols, rows)
    else:
        direction = Subspace.zero(f, ncols)
    return affine_span(f, point, direction)


def _flat_via_dee(L: AhTensor) -> AffineSubspace:
    return dee_space_to_connections(L, solve_flat_dee(L.algebra, L.jacobi, L.h))


def curvature_from_dee(D: DeeMap, a, b) -> np.ndarray:
    """``D({a,b}) - {a, D b} - {D a, b} - {1, a} D(b) + D(a) {1, b}``."""
    A = D.algebra
    f = A.field
    J = D.jacobi
    a = f.array(a)
    b = f.array(b)
    one = A.one
    Da, Db = D(a), D(b)
    val = D(J(a, b)) - J(a, Db) - J(Da, b) - A.multiply(J(one, a), Db) + A.multiply(Da, J(one, b))
    return f.reduce(val)


# -- the canonical jet connection ------------------------------------------------------

def canonical_jet_connection(A: Algebra, J: JacobiBracket, structure: QuotientLR | None = None
                             ) -> ConnectionCharacter:
    """``a j(b) -> {a, b}``, after checking that ``a (x) b -> {a, b}`` kills ``I^2``."""
    _check_pair(A, J)
    if structure is None:
        structure, _ = jet_module(A, J)
    if structure.provenance != "jet" or not isinstance(structure.parent, TensorSquare):
        raise ValueError("expected the 1-jet structure")
    f = A.field
    n = A.dim
    gamma = J.table.reshape(n * n, n)
    I2 = _ideal_data(A)["I2"]
    if I2.dim:
        bad = np.flatnonzero(f.nonzero_mask(f.matmul(I2.basis, gamma)).any(axis=-1))
        if len(bad):
            raise WellDefinednessError(f"a (x) b -> {{a, b}} does not vanish on I^2 (basis vector {bad[0]})")
    return ConnectionCharacter(structure, gamma[structure.sq.lift_columns], "canonical-jet")


# -- obstruction certificates ----------------------------------------------------------

@dataclass
class ObstructionCertificate:
    kind: str  # existence-2a | flatness-2b | fundamental | linear-system
    status: str
    witness: dict
    context: dict
    solution: AffineSubspace = dc_field(repr=False)
    rerun: Callable[[], AffineSubspace] | None = dc_field(default=None, repr=False)

    @property
    def obstructed(self) -> bool:
        return self.status == OBSTRUCTED

    def recheck(self) -> bool:
        """Re-solve the underlying system; True when it reproduces the recorded status."""
        if self.rerun is None:
            return True
        return self.rerun().is_empty == self.obstructed

    def to_json(self) -> dict:
        return {"kind": self.kind, "status": self.status, "witness": self.witness, "context": self.context}


def _status(S: AffineSubspace) -> str:
    return OBSTRUCTED if S.is_empty else UNOBSTRUCTED


def _paren(A: Algebra, v) -> str:
    s = A.format(v)
    return s if len(s.split()) == 1 else f"({s})"


def _s_system(A: Algebra, J: JacobiBracket, ann: Subspace, a):
    f = A.field
    n = A.dim
    if ann.dim == 0:
        return f.zeros((0, n)), f.zeros(0)
    m = np.concatenate([A.left(r) for r in ann.basis])
    rhs = np.concatenate([J(a, r) for r in ann.basis])
    return m, rhs


def solution_set_S(A: Algebra, J: JacobiBracket, h, a, ann: Subspace | None = None) -> AffineSubspace:
    """``S_a = {s : r s = {a, r} for all r in Ann(h)}``; its direction is ``H``."""
    ann = _ann_checked(A, J, h) if ann is None else ann
    m, rhs = _s_system(A, J, ann, A.field.array(a))
    return solve_affine(m, rhs, A.field)


def common_annihilator(A: Algebra, J: JacobiBracket, h) -> Subspace:
    """``H``: the intersection of ``Ann(r)`` over ``r`` in ``Ann(h)``."""
    ann = _ann_checked(A, J, h)
    if ann.dim == 0:
        return Subspace.full(A.field, A.dim)
    return annihilator(A, list(ann.basis))


def obstruction_existence(A: Algebra, J: JacobiBracket, h) -> ObstructionCertificate:
    """Is there ``a`` with ``a r = {1, r}`` for every ``r`` in ``Ann(h)``?  If not, no connection exists."""
    ann = _ann_checked(A, J, h)
    f = A.field
    one = A.one
    S = solution_set_S(A, J, h, one, ann)
    equations = [f"a*{_paren(A, r)} = {A.format(J(one, r))}" for r in ann.basis]
    context = {"h": A.format(h), "equations": equations}
    if S.is_empty:
        rows = sorted({i // A.dim for i, _ in S.certificate.combination})
        witness = {
            "inconsistent_equations": [equations[r] for r in rows],
            "combination": S.certificate.to_json(f)["combination"],
        }
    else:
        witness = {"solution": A.format(S.particular), "direction_dim": S.direction.dim}
    m, rhs = _s_system(A, J, ann, one)
    return ObstructionCertificate("existence-2a", _status(S), witness, context, S,
                                  lambda: solve_affine(m, rhs, f))


def obstruction_flatness(A: Algebra, J: JacobiBracket, h, b) -> ObstructionCertificate:
    """Is ``{b, s}`` in ``Im({1, .})`` for some ``s`` in ``S_1``?  Requires ``{1, b} = 0``.

    With ``S_1 = s0 + H`` this asks whether the affine set ``{b, s0} + {b, H}``
    meets ``Im({1, .})``; if it does not, no connection is flat.
    """
    ann = _ann_checked(A, J, h)
    f = A.field
    n = A.dim
    b = f.array(b)
    if not f.is_zero(J(A.one, b)):
        raise PreconditionError(f"{{1, {A.format(b)}}} != 0")
    S1 = solution_set_S(A, J, h, A.one, ann)
    if S1.is_empty:
        raise PreconditionError("S_1 is empty, so no connection exists at all")
    Hb = S1.direction.basis
    adb = J.ad(b)
    E = J.one_map
    k = Hb.shape[0]
    m = np.concatenate([f.matmul(adb, Hb.T) if k else f.zeros((n, 0)), f.reduce(-E)], axis=1)
    rhs = f.reduce(-f.matmul(adb, S1.particular))
    sol = solve_affine(m, rhs, f)
    context = {
        "h": A.format(h),
        "b": A.format(b),
        "s0": A.format(S1.particular),
        "H_dim": k,
        "image_point": A.format(f.matmul(adb, S1.particular)),
        "image_span": [A.format(v) for v in column_space(f.matmul(adb, Hb.T), f).basis] if k else [],
        "target_span": [A.format(v) for v in column_space(E, f).basis],
    }
    if sol.is_empty:
        witness = {"combination": sol.certificate.to_json(f)["combination"]}
    else:
        lam, c = sol.particular[:k], sol.particular[k:]
        s = f.reduce(S1.particular + f.matmul(lam, Hb)) if k else S1.particular
        witness = {"s": A.format(s), "c": A.format(c)}
    return ObstructionCertificate("flatness-2b", _status(sol), witness, context, sol,
                                  lambda: solve_affine(m, rhs, f))


def fundamental_obstruction(L: LieRinehart, h, zeta, a) -> ObstructionCertificate:
    """Given ``a zeta`` in ``K = ker(h .)``, is there ``b`` with ``a b = rho(zeta)(a)``?"""
    A = L.algebra
    f = A.field
    h = f.array(h)
    a = f.array(a)
    zeta = f.array(zeta)
    az = L.module.act_vec(a, zeta[None])
    if not f.is_zero(L.module.act_vec(h, az)):
        raise PreconditionError("a * zeta does not lie in the kernel of multiplication by h")
    m = A.left(a)
    rhs = f.matmul(L.anchor(zeta), a)
    sol = solve_affine(m, rhs, f)
    context = {"h": A.format(h), "zeta": L.module.format(zeta), "a": A.format(a),
               "equation": f"{_paren(A, a)}*b = {A.format(rhs)}"}
    witness = {} if sol.is_empty else {"b": A.format(sol.particular)}
    if sol.is_empty:
        witness["combination"] = sol.certificate.to_json(f)["combination"]
    return ObstructionCertificate("fundamental", _status(sol), witness, context, sol,
                                  lambda: solve_affine(m, rhs, f))


def _system_certificate(S: AffineSubspace, field, label: str, rerun) -> ObstructionCertificate:
    witness = {"system": label}
    if S.certificate is not None:
        witness.update(S.certificate.to_json(field))
    return ObstructionCertificate("linear-system", _status(S), witness, {"system": label}, S, rerun)


def flatness_candidates(A: Algebra, J: JacobiBracket) -> list[np.ndarray]:
    """Elements ``b`` with ``{1, b} = 0`` to try in the flatness test.

    Order: surviving variables, then other basis monomials (the unit is
    skipped, it never obstructs), then the RREF basis of ``ker {1, .}``.
    """
    f = A.field
    E = J.one_map
    out: list[np.ndarray] = []
    seen = set()
    order = list(A.generator_indices) + [i for i in range(A.dim) if i not in A.generator_indices]
    for i in order:
        if i == A.unit or not f.is_zero(E[:, i]):
            continue
        out.append(A.basis(i))
        seen.add(tuple(A.basis(i).tolist()))
    for v in kernel(E, f).basis:
        if tuple(v.tolist()) not in seen and not np.array_equal(v, A.one):
            out.append(v)
    return out


def find_flatness_certificate(A: Algebra, J: JacobiBracket, h) -> ObstructionCertificate | None:
    for b in flatness_candidates(A, J):
        cert = obstruction_flatness(A, J, h, b)
        if cert.obstructed:
            return cert
    return None


# -- the verdict ------------------------------------------------------------------------

@dataclass
class AntipodeVerdict:
    structure: LieRinehart
    answer: str  # yes | no
    connection_exists: bool | None
    path: str
    witness: ConnectionCharacter | None = None
    certificate: ObstructionCertificate | None = None
    certificates: list[ObstructionCertificate] = dc_field(default_factory=list)
    checks: list[VerificationReport] = dc_field(default_factory=list)
    cross_check: dict | None = None

    @property
    def yes(self) -> bool:
        return self.answer == "yes"

    def to_json(self) -> dict:
        return {
            "structure": self.structure.provenance,
            "dim": self.structure.dim,
            "answer": self.answer,
            "connection_exists": self.connection_exists,
            "path": self.path,
            "witness": self.witness.to_json() if self.witness is not None else None,
            "certificate": self.certificate.to_json() if self.certificate is not None else None,
            "certificates": [c.to_json() for c in self.certificates],
            "checks": [c.to_json() for c in self.checks],
            "cross_check": self.cross_check,
        }


def _witness_checks(L: LieRinehart, conn: ConnectionCharacter, scope: str) -> list[VerificationReport]:
    reps = [conn.axiom_report()]
    if not reps[0].passed:
        raise InternalInconsistency(f"solver witness violates the connection axiom: {reps[0].failing()[0]}")
    reps.append(curvature_check(L, conn, scope))
    if not reps[1].passed:
        raise InternalInconsistency(f"solver witness is not flat: {reps[1].failing()[0]}")
    return reps


def antipode_verdict(L: LieRinehart, report: VerificationReport | None = None, cross_check: bool = True,
                     cross_check_max_dim: int = GENERIC_CROSS_CHECK_MAX_DIM) -> AntipodeVerdict:
    """Does ``A`` carry a flat right connection, i.e. does the enveloping algebra admit an antipode?"""
    if report is None:
        report = verify_lie_rinehart(L)
    if not report.passed:
        raise UnverifiedStructure(f"structure fails {[c.name for c in report.failing()]}")
    small = cross_check and L.algebra.dim <= cross_check_max_dim
    if isinstance(L, AhTensor):
        return _verdict_ah(L, small)
    if L.provenance == "jet" and isinstance(L, QuotientLR) and isinstance(L.parent, TensorSquare):
        return _verdict_jet(L, small)
    return _verdict_generic(L)


def _verdict_ah(L: AhTensor, cross: bool) -> AntipodeVerdict:
    A, J, h = L.algebra, L.jacobi, L.h
    f = A.field
    ex = obstruction_existence(A, J, h)
    certs = [ex]
    witness = None
    if ex.obstructed:
        exists, answer, cert = False, "no", ex
        P = L.parent
        for r in L.ann.basis:
            fc = fundamental_obstruction(P, h, P.module.pure(A.one, A.one), r)
            if fc.obstructed:
                certs.append(fc)
                break
    else:
        dee = dee_solution_space(A, J, h)
        exists = not dee.is_empty
        if not exists:
            answer = "no"
            cert = _system_certificate(dee, f, "D constraints", lambda: dee_solution_space(A, J, h))
            certs.append(cert)
        else:
            flat = solve_flat_dee(A, J, h)
            if not flat.is_empty:
                answer, cert = "yes", None
                witness = connection_from_dee(DeeMap.from_vector(J, h, flat.particular), L)
            else:
                answer = "no"
                cert = find_flatness_certificate(A, J, h)
                if cert is None:
                    cert = _system_certificate(flat, f, "D constraints and curvature",
                                               lambda: solve_flat_dee(A, J, h))
                certs.append(cert)
    checks = _witness_checks(L, witness, "auto") if witness is not None else []
    verdict = AntipodeVerdict(L, answer, exists, "dee", witness, cert, certs, checks)
    if cross:
        verdict.cross_check = _cross_check_generic(L, verdict)
    return verdict


def _cross_check_generic(L: LieRinehart, v: AntipodeVerdict) -> dict:
    gen = solve_connection_generic(L)
    flat = solve_flat_connection(L, method="generic")
    if gen.is_empty != (not v.connection_exists):
        raise InternalInconsistency("specialised and generic solvers disagree on existence")
    if flat.is_empty == v.yes:
        raise InternalInconsistency("specialised and generic solvers disagree on flatness")
    for c in v.certificates:
        if not c.obstructed:
            continue
        if c.kind in ("existence-2a", "fundamental") and not gen.is_empty:
            raise InternalInconsistency(f"{c.kind} certificate contradicts a generic connection")
        if c.kind == "flatness-2b" and not flat.is_empty:
            raise InternalInconsistency("flatness certificate contradicts a generic flat connection")
    return {"generic_connections": not gen.is_empty, "generic_flat": not flat.is_empty,
            "generic_connection_dim": gen.dim, "generic_flat_dim": flat.dim, "agree": True}


def _verdict_jet(L: QuotientLR, cross: bool) -> AntipodeVerdict:
    witness = canonical_jet_connection(L.algebra, L.parent.jacobi, L)
    checks = _witness_checks(L, witness, "full")
    v = AntipodeVerdict(L, "yes", True, "canonical-jet", witness, None, [], checks)
    if cross and L.dim <= FULL_SCOPE_MAX_DIM:
        flat = solve_flat_connection(L, method="generic")
        if not flat.contains(witness.matrix.reshape(-1)):
            raise InternalInconsistency("generic flat solver misses the canonical jet connection")
        v.cross_check = {"generic_flat": True, "generic_flat_dim": flat.dim, "agree": True}
    return v


def _verdict_generic(L: LieRinehart) -> AntipodeVerdict:
    f = L.field
    gen = solve_connection_generic(L)
    flat = solve_flat_connection(L, method="generic")
    if not flat.is_empty:
        witness = connection_from_vector(L, flat.particular)
        return AntipodeVerdict(L, "yes", True, "generic", witness, None, [], _witness_checks(L, witness, "auto"))
    if gen.is_empty:
        cert = _system_certificate(gen, f, "connection axiom", lambda: solve_connection_generic(L))
    else:
        cert = _system_certificate(flat, f, "connection axiom and curvature",
                                   lambda: solve_flat_connection(L, method="generic"))
    return AntipodeVerdict(L, "no", not gen.is_empty, "generic", None, cert, [cert])


__all__ = [
    "AntipodeVerdict",
    "ConnectionAxiomViolation",
    "ConnectionCharacter",
    "DeeInvariantViolation",
    "DeeMap",
    "InternalInconsistency",
    "ObstructionCertificate",
    "PreconditionError",
    "UnverifiedStructure",
    "WellDefinednessError",
    "antipode_verdict",
    "canonical_jet_connection",
    "common_annihilator",
    "connection_axiom_check",
    "connection_from_dee",
    "curvature",
    "curvature_check",
    "curvature_from_dee",
    "dee_solution_space",
    "fundamental_obstruction",
    "obstruction_existence",
    "obstruction_flatness",
    "solution_set_S",
    "solve_connection_generic",
    "solve_flat_connection",
    "solve_flat_dee",
    "subspace_to_json",
    "vector_to_json",
]
