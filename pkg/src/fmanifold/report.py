"""Check bookkeeping and the ``fman-report/1`` document."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import __version__
from .errors import FmanError
from .fields import Residual
from .manifold import SAMPLER

REPORT_FORMAT = "fman-report/1"
ERROR_FRACTION = 0.10
POINT_ERRORS = (FmanError, np.linalg.LinAlgError, ZeroDivisionError, FloatingPointError, OverflowError)

PASS, FAIL, INFO, SKIP = "pass", "fail", "info", "skip"


def _num(x) -> float | None:
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _point(x) -> list[float]:
    return [float(v) for v in np.asarray(x, dtype=float).ravel()]


@dataclass
class Tolerance:
    abs: float
    rel: float

    def allowed(self, r: Residual) -> float:
        return self.abs + self.rel * r.scale

    def passes(self, r: Residual) -> bool:
        return bool(r.value <= self.allowed(r))

    def ratio(self, r: Residual) -> float:
        allowed = self.allowed(r)
        if allowed > 0:
            return r.value / allowed
        return 0.0 if r.value == 0 else math.inf


@dataclass
class CheckResult:
    name: str
    verdict: str
    tolerance: Tolerance | None = None
    max_residual: float | None = None
    median_residual: float | None = None
    scale: float | None = None
    points: int = 0
    failures: int = 0
    errors: int = 0
    witness: dict | None = None
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "verdict": self.verdict,
            "tolerance": None if self.tolerance is None else
            {"abs": self.tolerance.abs, "rel": self.tolerance.rel},
            "max_residual": _num(self.max_residual),
            "median_residual": _num(self.median_residual),
            "scale": _num(self.scale),
            "points": self.points,
            "failures": self.failures,
            "errors": self.errors,
            "witness": self.witness,
            "note": self.note,
        }


Outcome = Residual | Sequence[Residual] | Mapping[str, "Residual | Sequence[Residual]"]


class CheckRecorder:
    """Collects check results; every check is identified by a dotted name."""

    def __init__(self, tol_abs: float = 1e-9, tol_rel: float = 1e-9):
        self.default = Tolerance(tol_abs, tol_rel)
        self.results: dict[str, CheckResult] = {}

    def _add(self, result: CheckResult) -> CheckResult:
        if result.name in self.results:
            raise ValueError(f"check {result.name!r} recorded twice")
        self.results[result.name] = result
        return result

    # -- pointwise checks ---------------------------------------------------

    def pointwise(self, name: str, points: Iterable, fn: Callable[[np.ndarray], Outcome],
                  tol: Tolerance | None = None, info: bool = False, note: str = "",
                  chart: Sequence[str] | None = None) -> dict[str, CheckResult]:
        """Evaluate ``fn`` at every point; a mapping outcome yields one check per key."""
        tol = tol or self.default
        per_key: dict[str, list] = {}
        errors: list[tuple[int, list, str]] = []
        total = 0
        for idx, x in enumerate(points):
            total += 1
            try:
                out = fn(np.asarray(x, dtype=float))
            except POINT_ERRORS as exc:
                errors.append((idx, _point(x), str(exc)))
                continue
            items = out.items() if isinstance(out, Mapping) else [("", out)]
            for key, val in items:
                vals = [val] if isinstance(val, Residual) else list(val)
                per_key.setdefault(key, []).append((idx, _point(x), vals))
        keys = sorted(per_key) or [""]
        made = {}
        for key in keys:
            full = f"{name}.{key}" if key else name
            made[full] = self._add(self._judge(full, per_key.get(key, []), errors, total,
                                               tol, info, note, chart))
        return made

    def _judge(self, name, records, errors, total, tol, info, note, chart) -> CheckResult:
        values, scales, worst, failures = [], [], None, 0
        for idx, x, vals in records:
            point_ok = True
            for r in vals:
                values.append(r.value)
                scales.append(r.scale)
                ratio = tol.ratio(r)
                if not tol.passes(r):
                    point_ok = False
                if worst is None or ratio > worst[0]:
                    worst = (ratio, idx, x, r)
            failures += not point_ok
        n_err = len(errors)
        too_many = n_err > ERROR_FRACTION * total or (total > 0 and not records)
        witness = None
        if failures and worst is not None:
            witness = {"index": worst[1], "point": worst[2], "residual": _num(worst[3].value),
                       "scale": _num(worst[3].scale)}
        elif too_many and errors:
            witness = {"index": errors[0][0], "point": errors[0][1], "error": errors[0][2]}
        if witness is not None and chart is not None:
            witness["coordinates"] = list(chart)
        if info:
            verdict = INFO
            if witness is None and worst is not None:
                witness = {"index": worst[1], "point": worst[2], "residual": _num(worst[3].value),
                           "scale": _num(worst[3].scale)}
                if chart is not None:
                    witness["coordinates"] = list(chart)
        else:
            verdict = FAIL if failures or too_many else PASS
        text = note
        if n_err:
            first = f"{n_err} of {total} points could not be evaluated (first: {errors[0][2]})"
            text = f"{note}; {first}" if note else first
        return CheckResult(
            name=name, verdict=verdict, tolerance=None if info else tol,
            max_residual=max(values) if values else None,
            median_residual=float(np.median(values)) if values else None,
            scale=max(scales) if scales else None, points=total, failures=failures,
            errors=n_err, witness=witness, note=text)

    # -- single-shot checks -------------------------------------------------

    def residual(self, name: str, r: Residual, tol: Tolerance | None = None, note: str = "",
                 witness: dict | None = None, info: bool = False) -> CheckResult:
        tol = tol or self.default
        ok = tol.passes(r)
        return self._add(CheckResult(
            name=name, verdict=INFO if info else (PASS if ok else FAIL),
            tolerance=None if info else tol, max_residual=r.value, median_residual=r.value,
            scale=r.scale, points=1, failures=0 if ok or info else 1,
            witness=None if ok and not info else witness, note=note))

    def verdict(self, name: str, ok: bool, note: str = "", value: float | None = None,
                witness: dict | None = None, points: int = 0, failures: int = 0) -> CheckResult:
        return self._add(CheckResult(
            name=name, verdict=PASS if ok else FAIL, max_residual=value, median_residual=value,
            points=points, failures=failures, witness=None if ok else witness, note=note))

    def info(self, name: str, note: str, value: float | None = None,
             witness: dict | None = None, points: int = 0) -> CheckResult:
        return self._add(CheckResult(name=name, verdict=INFO, max_residual=value,
                                     median_residual=value, points=points, witness=witness, note=note))

    def skip(self, name: str, note: str) -> CheckResult:
        return self._add(CheckResult(name=name, verdict=SKIP, note=note))

    def error(self, name: str, exc: BaseException, witness: dict | None = None) -> CheckResult:
        point = getattr(exc, "point", None)
        if witness is None and point is not None:
            witness = {"point": list(point), "error": str(exc)}
        return self._add(CheckResult(name=name, verdict=FAIL, errors=1, witness=witness, note=str(exc)))


# -- report document ----------------------------------------------------------

def overall_verdict(results: Iterable[CheckResult]) -> str:
    return FAIL if any(r.verdict == FAIL for r in results) else PASS


def build_report(spec_info: dict, suite: str, environment: dict, results: Mapping[str, CheckResult],
                 warnings: Sequence[str] = (), artifacts: dict | None = None) -> dict:
    checks = [results[k].to_dict() for k in sorted(results)]
    summary = {v: sum(1 for c in checks if c["verdict"] == v) for v in (PASS, FAIL, INFO, SKIP)}
    summary["total"] = len(checks)
    doc = {
        "format": REPORT_FORMAT,
        "spec": spec_info,
        "suite": suite,
        "environment": {"sampler": SAMPLER, "package_version": __version__, **environment},
        "checks": checks,
        "warnings": list(warnings),
        "summary": summary,
        "verdict": overall_verdict(results.values()),
    }
    if artifacts is not None:
        doc["artifacts"] = artifacts
    return doc


def dumps(doc: Mapping) -> str:
    """Canonical JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False, ensure_ascii=False) + "\n"


def _fmt(x) -> str:
    return "—" if x is None else f"{x:.3e}"


def render_text(doc: Mapping) -> str:
    lines = [f"{doc['spec']['name']}: suite '{doc['suite']}' (seed {doc['environment']['seed']}, "
             f"{doc['environment']['samples']} samples)"]
    width = max((len(c["name"]) for c in doc["checks"]), default=10)
    for c in doc["checks"]:
        tol = c["tolerance"]
        tol_txt = "" if tol is None else f"  tol {tol['abs']:.0e}+{tol['rel']:.0e}·scale"
        line = (f"  {c['verdict'].upper():4}  {c['name']:<{width}}  max {_fmt(c['max_residual'])}"
                f"  scale {_fmt(c['scale'])}{tol_txt}")
        lines.append(line)
        if c["witness"] is not None and c["verdict"] == FAIL:
            lines.append(f"        witness: {json.dumps(c['witness'], sort_keys=True)}")
        if c["note"]:
            lines.append(f"        {c['note']}")
    for w in doc["warnings"]:
        lines.append(f"  warning: {w}")
    s = doc["summary"]
    lines.append(f"{doc['verdict'].upper()}: {s['pass']} passed, {s['fail']} failed, "
                 f"{s['info']} informational, {s['skip']} skipped")
    return "\n".join(lines) + "\n"
