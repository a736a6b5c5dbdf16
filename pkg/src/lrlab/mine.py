"""Search small GF(2) Jacobi algebras for Lie-Rinehart pairs without an antipode.

Quotients ``GF(2)[x, y, z] / I`` with ``I`` monomial are enumerated through
their staircases (the down-closed sets of standard monomials), one
representative per variable-permutation orbit.  Derivation images are
monomials; for small algebras every vector-field bracket is enumerated, for
larger ones a seeded sample is drawn, together with sampled derivation-pair
brackets.  Every instance is analysed for every basis monomial ``h``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations, product
from typing import Iterator

import numpy as np

from .algebra import AlgebraError, monomial_name
from .connections import InternalInconsistency, antipode_verdict, common_annihilator
from .dsl import DslError, build_instance, parse_presentation
from .jacobi import verify_jacobi
from .lie_rinehart import ConditionViolation, HypothesisViolation, ah_tensor_module, verify_lie_rinehart

VARIABLES = ("x", "y", "z")
MINE_MAX_DIM = 8
EXHAUSTIVE_LIMIT = 32


Monomial = tuple[int, ...]


def _downsets(nvars: int, dim_max: int) -> list[frozenset[Monomial]]:
    """All finite down-closed sets of exponent vectors with at most ``dim_max`` elements."""
    zero = (0,) * nvars
    seen = {frozenset([zero])}
    frontier = [frozenset([zero])]
    while frontier:
        nxt = []
        for D in frontier:
            if len(D) >= dim_max:
                continue
            for m in D:
                for i in range(nvars):
                    c = m[:i] + (m[i] + 1,) + m[i + 1:]
                    if c in D:
                        continue
                    if all(c[:j] + (c[j] - 1,) + c[j + 1:] in D for j in range(nvars) if c[j]):
                        E = D | {c}
                        if E not in seen:
                            seen.add(E)
                            nxt.append(E)
        frontier = nxt
    return list(seen)


def _permute(m: Monomial, perm) -> Monomial:
    return tuple(m[perm[i]] for i in range(len(m)))


def _generators(D: frozenset[Monomial], nvars: int) -> tuple[Monomial, ...]:
    """Minimal monomials outside ``D``."""
    cands = set()
    for m in D:
        for i in range(nvars):
            c = m[:i] + (m[i] + 1,) + m[i + 1:]
            if c not in D:
                cands.add(c)
    gens = [c for c in cands if all(c[:j] + (c[j] - 1,) + c[j + 1:] in D for j in range(nvars) if c[j])]
    return tuple(sorted(gens, key=lambda e: (sum(e), tuple(-x for x in e))))


@dataclass(frozen=True)
class IdealCandidate:
    nvars: int
    dim: int
    generators: tuple[Monomial, ...]

    @property
    def variables(self) -> tuple[str, ...]:
        return VARIABLES[: self.nvars]

    def text(self) -> str:
        return " ".join(monomial_name(self.variables, g) for g in self.generators)


def enumerate_ideals(dim_max: int) -> list[IdealCandidate]:
    """Monomial ideals with ``2 <= dim <= dim_max`` in which every variable survives."""
    if dim_max > MINE_MAX_DIM:
        raise ValueError(f"dim-max must be at most {MINE_MAX_DIM}")
    out = {}
    for k in range(1, len(VARIABLES) + 1):
        for D in _downsets(k, dim_max):
            if len(D) < 2:
                continue
            units = [tuple(int(j == i) for j in range(k)) for i in range(k)]
            if not all(u in D for u in units):
                continue
            canon = min(tuple(sorted(_permute(m, p) for m in D)) for p in permutations(range(k)))
            if (k, canon) in out:
                continue
            out[(k, canon)] = IdealCandidate(k, len(D), _generators(frozenset(canon), k))
    return sorted(out.values(), key=lambda c: (c.dim, c.nvars, c.generators))


def _presentation_text(ideal: IdealCandidate, basis: list[str], recipe: str, images) -> str:
    v = ideal.variables
    lines = ["field GF(2)", "vars " + " ".join(v), "ideal " + ideal.text()]
    names = ["E", "F"][: len(images)]
    for name, imgs in zip(names, images):
        parts = [f"{v[i]} -> {basis[j]}" for i, j in enumerate(imgs) if j is not None]
        lines.append(f"der {name}: " + (", ".join(parts) if parts else f"{v[0]} -> 0"))
    lines.append("bracket vector_field(E)" if recipe == "vector_field" else "bracket jacobi_pair(E, F)")
    return "\n".join(lines) + "\n"


def _instance_key(ideal: IdealCandidate, basis_exps: list[Monomial], recipe: str, images) -> tuple:
    """Smallest relabelling of ``images`` over the permutations that fix the ideal."""
    k = ideal.nvars
    gens = tuple(sorted(ideal.generators))
    index = {e: i for i, e in enumerate(basis_exps)}
    keys = []
    for p in permutations(range(k)):
        if tuple(sorted(_permute(g, p) for g in ideal.generators)) != gens:
            continue
        perm_imgs = []
        for imgs in images:
            mapped = []
            for i in range(k):
                # old variable p[i] becomes variable i
                j = imgs[p[i]]
                mapped.append(-1 if j is None else index[_permute(basis_exps[j], p)])
            perm_imgs.append(tuple(mapped))
        keys.append(tuple(perm_imgs))
    return (ideal.nvars, gens, recipe, min(keys))


def _candidates(ideal: IdealCandidate, basis_exps: list[Monomial], rng: np.random.Generator,
                per_ideal: int) -> list[tuple[str, tuple]]:
    n = len(basis_exps)
    choices = [None] + list(range(n))
    k = ideal.nvars
    out = []
    total = len(choices) ** k
    if total <= EXHAUSTIVE_LIMIT:
        for imgs in product(choices, repeat=k):
            out.append(("vector_field", (tuple(imgs),)))
        order = rng.permutation(len(out))
        out = [out[i] for i in order]
    else:
        for _ in range(per_ideal):
            out.append(("vector_field", (tuple(choices[i] for i in rng.integers(0, len(choices), k)),)))
    for _ in range(per_ideal):
        E = tuple(choices[i] for i in rng.integers(0, len(choices), k))
        F = tuple(choices[i] for i in rng.integers(0, len(choices), k))
        out.append(("jacobi_pair", (E, F)))
    return out


def analyse_h(inst, h, cross_check: bool = True) -> dict:
    """Hypothesis status and verdicts for one ``(A, J, h)``."""
    A, J = inst.algebra, inst.bracket
    rec = {"h": A.format(h)}
    try:
        M = ah_tensor_module(A, J, h)
    except HypothesisViolation as exc:
        r, i, j = exc.witness
        rec.update(hypothesis=False, witness=[int(r), A.names[i], A.names[j]])
        return rec
    except ConditionViolation as exc:
        rec.update(hypothesis=True, condition_violation=exc.condition, witness=str(exc.witness))
        return rec
    rec["hypothesis"] = True
    rec["ann_dim"] = M.ann.dim
    rec["H_dim"] = common_annihilator(A, J, h).dim
    rec["dim"] = M.dim
    report = verify_lie_rinehart(M)
    rec["lie_rinehart"] = report.passed
    if not report.passed:
        rec["inconsistent"] = "structure fails the Lie-Rinehart axioms"
        return rec
    try:
        v = antipode_verdict(M, report, cross_check=cross_check)
    except InternalInconsistency as exc:
        rec["inconsistent"] = str(exc)
        return rec
    rec["connection_exists"] = v.connection_exists
    rec["answer"] = v.answer
    rec["certificate"] = v.certificate.kind if v.certificate is not None else None
    rec["certificates"] = sorted(c.kind for c in v.certificates if c.obstructed)
    rec["agree"] = bool(v.cross_check and v.cross_check.get("agree"))
    return rec


def mine(dim_max: int, seed: int, count: int, per_ideal: int = 3, cross_check: bool = True) -> Iterator[dict]:
    """Yield up to ``count`` reports for valid Jacobi instances, in seed-determined order."""
    if dim_max > MINE_MAX_DIM:
        raise ValueError(f"dim-max must be at most {MINE_MAX_DIM}")
    rng = np.random.default_rng(seed)
    ideals = enumerate_ideals(dim_max)
    seen = set()
    produced = 0
    for idx in rng.permutation(len(ideals)):
        ideal = ideals[int(idx)]
        probe = build_instance(parse_presentation(_presentation_text(ideal, ["1"], "vector_field", [()])))
        A0 = probe.algebra
        basis_exps = list(A0.monomials)
        for recipe, images in _candidates(ideal, basis_exps, rng, per_ideal):
            key = _instance_key(ideal, basis_exps, recipe, images)
            if key in seen:
                continue
            seen.add(key)
            text = _presentation_text(ideal, list(A0.names), recipe, images)
            try:
                inst = build_instance(parse_presentation(text))
            except (AlgebraError, DslError):
                continue
            A, J = inst.algebra, inst.bracket
            if not verify_jacobi(J).passed:
                continue
            if not J.table.any():
                continue
            records = [analyse_h(inst, A.basis(i), cross_check) for i in range(A.dim)]
            yield {"presentation": text, "dim": A.dim, "recipe": recipe, "h": records}
            produced += 1
            if produced >= count:
                return


def summarise(reports: list[dict]) -> dict:
    cases = [r for rep in reports for r in rep["h"]]
    ah = [c for c in cases if c.get("hypothesis") and "condition_violation" not in c]
    return {
        "instances": len(reports),
        "h_candidates": len(cases),
        "ah_structures": len(ah),
        "hypothesis_failures": sum(1 for c in cases if c.get("hypothesis") is False),
        "condition_failures": sum(1 for c in cases if "condition_violation" in c),
        "no_connection": sum(1 for c in ah if c.get("connection_exists") is False),
        "connection_not_flat": sum(1 for c in ah if c.get("connection_exists") and c.get("answer") == "no"),
        "antipode": sum(1 for c in ah if c.get("answer") == "yes"),
        "inconsistencies": sum(1 for c in cases if "inconsistent" in c),
    }
