"""Command pipelines and the deterministic report they produce.

Every pipeline returns a :class:`Report` together with a process exit code.
The JSON form sorts keys and keeps wall-clock measurements in a separate
``timings`` block, so two runs on the same input differ only there.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np

from . import __version__
from .algebra import AlgebraError
from .connections import (
    InternalInconsistency,
    UnverifiedStructure,
    antipode_verdict,
    common_annihilator,
)
from .dsl import DslError, build_instance, parse_presentation
from .jacobi import verify_hamiltonian_hom, verify_jacobi
from .lie_rinehart import (
    ConditionViolation,
    HypothesisViolation,
    ah_tensor_module,
    jet_descent_check,
    jet_module,
    tensor_square,
    verify_lie_rinehart,
)
from .verification import VerificationReport

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3
EXIT_NO = 10

TARGETS = ("ah", "jet")


class InputError(ValueError):
    """The input cannot be turned into the requested structure."""

    def __init__(self, kind: str, message: str, **details):
        super().__init__(message)
        self.kind = kind
        self.details = details

    def to_json(self) -> dict:
        return {"kind": self.kind, "message": str(self), **self.details}


def _plain(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_plain(x) for x in obj.tolist()]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


class Report:
    def __init__(self, command: str, source: str | None = None):
        self.data: dict = {"tool": {"name": "lrlab", "version": __version__}, "command": command}
        if source is not None:
            self.data["input"] = {"sha256": hashlib.sha256(source.encode("utf-8")).hexdigest()}
        self.timings: dict[str, float] = {}

    def __getitem__(self, key):
        return self.data[key]

    def __setitem__(self, key, value):
        self.data[key] = value

    def get(self, key, default=None):
        return self.data.get(key, default)

    @contextmanager
    def timed(self, stage: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[stage] = round(time.perf_counter() - t0, 6)

    def to_dict(self, timings: bool = True) -> dict:
        out = dict(self.data)
        if timings:
            out["timings"] = dict(self.timings)
        return out

    def to_json(self, timings: bool = True) -> str:
        return json.dumps(self.to_dict(timings), sort_keys=True, indent=2, ensure_ascii=False,
                          default=_plain) + "\n"

    def to_text(self) -> str:
        return render_text(self.to_dict())


def write_atomic(path: str, text: str):
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".lrlab-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- pipelines -----------------------------------------------------------------------

def load_instance(text: str):
    try:
        return build_instance(parse_presentation(text))
    except DslError as exc:
        raise InputError("syntax", exc.message, line=exc.line, column=exc.column) from None
    except AlgebraError as exc:
        raise InputError("construction", str(exc)) from None


def _record(report: Report, rep: VerificationReport):
    report.data.setdefault("verification", []).append(rep.to_json())


def _error(report: Report, exc: Exception, code: int) -> tuple[Report, int]:
    if isinstance(exc, InputError):
        report["error"] = exc.to_json()
    elif isinstance(exc, HypothesisViolation):
        report["error"] = {"kind": "ah-hypothesis", "message": str(exc), "witness": list(exc.witness)}
    elif isinstance(exc, ConditionViolation):
        report["error"] = {"kind": f"quotient-condition-{exc.condition}", "message": str(exc),
                           "witness": _plain_witness(exc.witness)}
    else:
        report["error"] = {"kind": type(exc).__name__, "message": str(exc)}
    report["status"] = "error"
    return report, code


def _plain_witness(w):
    if isinstance(w, (list, tuple)):
        return [_plain_witness(x) for x in w]
    return w if isinstance(w, (str, int, float, bool)) or w is None else str(w)


def run_verify(text: str) -> tuple[Report, int]:
    """Every structure check that applies to the presentation."""
    report = Report("verify", text)
    try:
        inst = load_instance(text)
    except InputError as exc:
        return _error(report, exc, EXIT_INPUT)
    verify_instance(inst, report)
    passed = all(r["passed"] for r in report["verification"])
    report["status"] = "pass" if passed else "fail"
    return report, EXIT_OK if passed else EXIT_CHECK_FAILED


def verify_instance(inst, report: Report) -> dict:
    """Run the checks, record them in ``report`` and return the verified structures by target."""
    A, J = inst.algebra, inst.bracket
    dims = report.data.setdefault("dims", {})
    dims["A"] = A.dim
    built = {}
    with report.timed("jacobi"):
        jac = verify_jacobi(J)
    _record(report, jac)
    if not jac.passed:
        return built
    with report.timed("hamiltonian"):
        _record(report, verify_hamiltonian_hom(J))
    with report.timed("tensor_square"):
        L = tensor_square(A, J)
        dims["AA"] = L.dim
        _record(report, verify_lie_rinehart(L))
    with report.timed("jet"):
        descent = jet_descent_check(A, J, _parent=L)
        _record(report, descent)
        if descent.passed:
            jet, _ = jet_module(A, J, descent)
            dims["jet"] = jet.dim
            rep = verify_lie_rinehart(jet)
            _record(report, rep)
            built["jet"] = (jet, rep)
    if inst.h is not None:
        with report.timed("ah_tensor"):
            hyp = VerificationReport("ah-hypothesis")
            try:
                M = ah_tensor_module(A, J, inst.h)
            except HypothesisViolation as exc:
                hyp.add("annihilator_kills_bracket", [list(exc.witness)])
                M = None
            except ConditionViolation as exc:
                hyp.add("annihilator_kills_bracket", [])
                hyp.add(f"quotient_condition_{exc.condition}", [_plain_witness(exc.witness)])
                M = None
            else:
                hyp.add("annihilator_kills_bracket", [])
            _record(report, hyp)
            if M is not None:
                dims["Ann"] = M.ann.dim
                dims["H"] = common_annihilator(A, J, inst.h).dim
                dims["AhA"] = M.dim
                rep = verify_lie_rinehart(M)
                _record(report, rep)
                built["ah"] = (M, rep)
    return built


def build_target(inst, target: str, report: Report):
    """The Lie-Rinehart structure named by ``target``, with dims recorded in ``report``."""
    A, J = inst.algebra, inst.bracket
    jac = verify_jacobi(J)
    if not jac.passed:
        _record(report, jac)
        raise InputError("invalid-bracket", "the bracket is not a Jacobi bracket",
                         witness=_plain_witness(jac.failing()[0].witnesses[:1]))
    dims = report.data.setdefault("dims", {})
    dims["A"] = A.dim
    if target == "ah":
        if inst.h is None:
            raise InputError("missing-h", "target ah needs an 'h = ...' line")
        M = ah_tensor_module(A, J, inst.h)
        dims["Ann"] = M.ann.dim
        dims["H"] = common_annihilator(A, J, inst.h).dim
        dims["AhA"] = M.dim
        return M
    if target == "jet":
        M, _ = jet_module(A, J)
        dims["jet"] = M.dim
        return M
    raise InputError("usage", f"unknown target {target!r}")


def run_antipode(text: str, target: str) -> tuple[Report, int]:
    report = Report("antipode", text)
    report["target"] = target
    try:
        inst = load_instance(text)
        with report.timed("structure"):
            M = build_target(inst, target, report)
        with report.timed("verify"):
            rep = verify_lie_rinehart(M)
        _record(report, rep)
        with report.timed("verdict"):
            v = antipode_verdict(M, rep)
    except (InputError, HypothesisViolation, ConditionViolation, UnverifiedStructure) as exc:
        return _error(report, exc, EXIT_INPUT)
    except InternalInconsistency as exc:
        return _error(report, exc, EXIT_INTERNAL)
    report["verdict"] = v.to_json()
    report["status"] = "ok"
    return report, EXIT_OK if v.yes else EXIT_NO


def run_preset(name: str) -> tuple[Report, int]:
    """Verify and decide a built-in presentation, comparing against its recorded answers."""
    from .presets import PRESETS

    if name not in PRESETS:
        report = Report("preset")
        return _error(report, InputError("usage", f"unknown preset {name!r}; choose from "
                                         + ", ".join(sorted(PRESETS))), EXIT_INPUT)
    text, expected = PRESETS[name]
    report = Report("preset", text)
    report["preset"] = name
    inst = load_instance(text)
    built = verify_instance(inst, report)
    verified = all(r["passed"] for r in report["verification"])
    verdicts = {}
    try:
        for target in TARGETS:
            if target not in built:
                continue
            M, rep = built[target]
            with report.timed(f"verdict.{target}"):
                verdicts[target] = antipode_verdict(M, rep).to_json()
    except (UnverifiedStructure, InternalInconsistency) as exc:
        return _error(report, exc, EXIT_INTERNAL)
    report["verdicts"] = verdicts
    dims = report["dims"]
    mismatches = []
    if not verified:
        mismatches.append("verification failed")
    for key, value in sorted(expected.dims.items()):
        if dims.get(key) != value:
            mismatches.append(f"dim {key}: expected {value}, got {dims.get(key)}")
    ah = verdicts.get("ah", {})
    jet = verdicts.get("jet", {})
    for label, got, want in [("ah answer", ah.get("answer"), expected.ah_answer),
                             ("ah connection", ah.get("connection_exists"), expected.ah_connection_exists),
                             ("ah certificate", (ah.get("certificate") or {}).get("kind"), expected.ah_certificate),
                             ("jet answer", jet.get("answer"), expected.jet_answer)]:
        if got != want:
            mismatches.append(f"{label}: expected {want}, got {got}")
    report["expectations"] = {"met": not mismatches, "mismatches": mismatches}
    report["status"] = "ok" if not mismatches else "regression"
    return report, EXIT_OK if not mismatches else EXIT_INTERNAL


def run_mine(dim_max: int, seed: int, count: int) -> tuple[Report, int]:
    from .mine import MINE_MAX_DIM, mine, summarise

    report = Report("mine")
    report["parameters"] = {"dim_max": dim_max, "seed": seed, "count": count}
    if dim_max > MINE_MAX_DIM or dim_max < 1 or count < 0:
        return _error(report, InputError("usage", f"need 1 <= dim-max <= {MINE_MAX_DIM} and count >= 0"),
                      EXIT_INPUT)
    with report.timed("mine"):
        instances = list(mine(dim_max, seed, count))
    for inst in instances:
        inst["sha256"] = hashlib.sha256(inst["presentation"].encode("utf-8")).hexdigest()
    summary = summarise(instances)
    report["instances"] = instances
    report["summary"] = summary
    report["status"] = "ok" if summary["inconsistencies"] == 0 else "inconsistent"
    return report, EXIT_OK if summary["inconsistencies"] == 0 else EXIT_INTERNAL


# -- text rendering ------------------------------------------------------------------

def _render_verification(reps: list[dict]) -> list[str]:
    lines = []
    for rep in reps:
        lines.append(f"[{'PASS' if rep['passed'] else 'FAIL'}] {rep['subject']}")
        for c in rep["checks"]:
            mark = "ok" if c["passed"] else f"FAIL ({c['failures']})"
            wit = "" if c["passed"] else f"  e.g. {c['witnesses'][:3]}"
            lines.append(f"    {c['name']} [{c['scope']}]: {mark}{wit}")
    return lines


def _render_certificate(c: dict) -> str:
    w = c["witness"]
    if isinstance(w, dict):
        detail = ", ".join(f"{k}={v}" for k, v in sorted(w.items()))
    else:
        detail = str(w)
    return f"{c['kind']}: {c['status']} ({detail})"


def _render_verdict(label: str, v: dict) -> list[str]:
    lines = [f"{label}: antipode {v['answer']} (structure {v['structure']}, dim {v['dim']}, path {v['path']})",
             f"    connection exists: {v['connection_exists']}"]
    if v["witness"] is not None:
        vals = v["witness"]["values"]
        shown = ", ".join(f"{k} -> {x}" for k, x in list(vals.items())[:6])
        more = f", ... ({len(vals)} generators)" if len(vals) > 6 else ""
        lines.append(f"    flat connection ({v['witness']['source']}): {shown}{more}")
    for c in v["certificates"]:
        lines.append("    certificate " + _render_certificate(c))
    if v["cross_check"] is not None:
        lines.append(f"    generic cross-check: {v['cross_check']}")
    return lines


def render_text(d: dict) -> str:
    lines = [f"lrlab {d['tool']['version']} {d['command']}"]
    if "input" in d:
        lines.append(f"input sha256 {d['input']['sha256']}")
    if "error" in d:
        e = d["error"]
        where = f" at line {e['line']}, column {e['column']}" if e.get("line") else ""
        lines.append(f"error ({e['kind']}){where}: {e['message']}")
    if "dims" in d:
        lines.append("dims " + " ".join(f"{k}={v}" for k, v in sorted(d["dims"].items())))
    if "verification" in d:
        lines.extend(_render_verification(d["verification"]))
    if "verdict" in d:
        lines.extend(_render_verdict(d.get("target", "target"), d["verdict"]))
    for target, v in sorted(d.get("verdicts", {}).items()):
        lines.extend(_render_verdict(target, v))
    if "expectations" in d:
        ex = d["expectations"]
        lines.append("expectations met" if ex["met"] else "EXPECTATION MISMATCH: " + "; ".join(ex["mismatches"]))
    for inst in d.get("instances", []):
        body = inst["presentation"].strip().splitlines()[2:]
        lines.append(f"instance dim {inst['dim']}: " + " | ".join(body))
        for c in inst["h"]:
            if not c.get("hypothesis"):
                lines.append(f"    h = {c['h']}: hypothesis fails")
            elif "condition_violation" in c:
                lines.append(f"    h = {c['h']}: quotient condition {c['condition_violation']} fails")
            else:
                cert = f", {c['certificate']}" if c.get("certificate") else ""
                lines.append(f"    h = {c['h']}: antipode {c.get('answer')}{cert}, Ann {c['ann_dim']}, "
                             f"cross-check {'agrees' if c.get('agree') else 'DISAGREES'}")
    if "summary" in d:
        lines.append("summary " + " ".join(f"{k}={v}" for k, v in sorted(d["summary"].items())))
    if d.get("timings"):
        lines.append("timings " + " ".join(f"{k}={v:.2f}s" for k, v in sorted(d["timings"].items())))
    return "\n".join(lines) + "\n"
