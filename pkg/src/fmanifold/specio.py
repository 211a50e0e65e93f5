"""Specification files (``fman-spec/1``): TOML documents validated by a JSON Schema."""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import numpy as np
from jsonschema import Draft202012Validator

from .errors import EvaluationError, ExprSyntaxError, SpecError, UnknownIdentifierError
from .expr import eval_float, parse, to_source
from .fields import ExprTensor
from .manifold import ManifoldSpec

if sys.version_info >= (3, 11):
    import tomllib
else:  # Python < 3.11
    import tomli as tomllib

SPEC_FORMAT = "fman-spec/1"
REPORT_FORMAT = "fman-report/1"


def load_schema(name: str) -> dict:
    text = resources.files("fmanifold").joinpath("schemas", name).read_text(encoding="utf-8")
    return json.loads(text)


_VALIDATORS: dict[str, Draft202012Validator] = {}


def validator(name: str) -> Draft202012Validator:
    if name not in _VALIDATORS:
        _VALIDATORS[name] = Draft202012Validator(load_schema(name))
    return _VALIDATORS[name]


def _json_path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


@dataclass
class CheckSettings:
    seed: int = 42
    samples: int = 32
    tol_abs: float = 1e-9
    tol_rel: float = 1e-9
    order: int = 8

    def updated(self, **kw) -> "CheckSettings":
        vals = {k: v for k, v in kw.items() if v is not None}
        return CheckSettings(**{**self.__dict__, **vals})


@dataclass
class Expansion:
    fields: tuple[str, ...]
    signs: tuple[int, ...]
    pairing: str = "first"


@dataclass
class SpecFile:
    """A validated specification.

    ``manifold`` is present when the file gives structure constants; a file
    with only a ``lax`` section describes a reduction whose structure is
    assembled by :mod:`fmanifold.benney`.
    """

    name: str
    coords: tuple[str, ...]
    box: np.ndarray
    manifold: ManifoldSpec | None
    lax: Any = None
    phi: tuple | None = None
    phi_source: tuple[str, ...] | None = None
    moments: int = 5
    fields: dict = field(default_factory=dict)
    expansion: Expansion | None = None
    settings: CheckSettings = field(default_factory=CheckSettings)
    description: str = ""
    warnings: list = field(default_factory=list)
    raw: dict = field(default_factory=dict)
    path: str | None = None
    _reduction: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return len(self.coords)

    def geometry(self, phi="spec") -> ManifoldSpec:
        """The manifold the algebraic suites run on.

        For a reduction this is the assembled Riemann-invariant chart (twisted
        by the file's ``phi`` unless ``phi`` is given explicitly).
        """
        if self.manifold is not None:
            return self.manifold
        if self.lax is None:
            raise SpecError("the file defines neither structure constants nor a Lax function")
        from .benney import build_riemannian_fmanifold

        phi = self.phi if phi == "spec" else phi
        key = None if phi is None else tuple(to_source(e.root) for e in phi)
        if key not in self._reduction:
            self._reduction[key] = build_riemannian_fmanifold(
                self.lax, self.box, phi, name=self.name, description=self.description)
        return self._reduction[key]


# -- loading ------------------------------------------------------------------

def load_spec(path) -> SpecFile:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise SpecError(f"no such file: {path}") from None
    except UnicodeDecodeError as exc:
        raise SpecError(f"file is not valid UTF-8: {exc}") from None
    spec = loads_spec(text)
    spec.path = str(path)
    return spec


def fixture_names() -> list[str]:
    """Names of the specification files shipped with the package."""
    root = resources.files("fmanifold").joinpath("fixtures")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def fixture_text(name: str) -> str:
    if name not in fixture_names():
        raise SpecError(f"no fixture named '{name}' (available: {', '.join(fixture_names())})")
    return resources.files("fmanifold").joinpath("fixtures", f"{name}.toml").read_text(encoding="utf-8")


def load_fixture(name: str) -> SpecFile:
    spec = loads_spec(fixture_text(name))
    spec.path = f"fixture:{name}"
    return spec


def loads_spec(text: str) -> SpecFile:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise SpecError(f"syntax error: {exc}") from None
    return spec_from_dict(data)


def validate_spec_dict(data: Mapping) -> None:
    errors = sorted(validator("fman-spec-1.schema.json").iter_errors(data),
                    key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        e = errors[0]
        raise SpecError(f"schema violation: {e.message}", _json_path(e.absolute_path))


def _parse(src: str, chart, params, where: str, allow_p: bool = False):
    try:
        return parse(src, chart, allow_p=allow_p, params=tuple(params))
    except (ExprSyntaxError, UnknownIdentifierError) as exc:
        raise SpecError(str(exc), where) from exc


def _probe_points(box: np.ndarray, count: int = 4) -> np.ndarray:
    rng = np.random.default_rng(0)
    lo, hi = box[:, 0], box[:, 1]
    return np.vstack([box.mean(axis=1), lo + (hi - lo) * rng.random((count, len(lo)))])


def _agree(a, b, chart, params, box, tol: float) -> bool:
    for x in _probe_points(box):
        try:
            va = float(eval_float(a, x, params))
            vb = float(eval_float(b, x, params))
        except EvaluationError:
            return False
        if abs(va - vb) > tol * (1.0 + max(abs(va), abs(vb))):
            return False
    return True


def _symmetric_table(entries, n, rank, chart, params, box, where, warnings, tol):
    """Fill a table symmetric in its last two indices from sparse entries."""
    table = np.empty((n,) * rank, dtype=object)
    given: dict[tuple, tuple[str, int]] = {}
    for pos, e in enumerate(entries):
        idx = tuple(int(e[k]) - 1 for k in ("i", "j", "k")[:rank])
        if any(i >= n for i in idx):
            raise SpecError(f"index out of range 1..{n}", f"{where}[{pos}]")
        if idx in given:
            raise SpecError(f"duplicate entry for {tuple(i + 1 for i in idx)}", f"{where}[{pos}]")
        _parse(str(e["expr"]), chart, params, f"{where}[{pos}].expr")
        given[idx] = (str(e["expr"]), pos)
    for idx, (src, pos) in given.items():
        swapped = idx[:-2] + (idx[-1], idx[-2])
        other = given.get(swapped)
        if other is None or swapped == idx:
            table[idx] = src
            table[swapped] = src
            continue
        a = _parse(src, chart, params, f"{where}[{pos}].expr")
        b = _parse(other[0], chart, params, f"{where}[{other[1]}].expr")
        if src == other[0] or _agree(a, b, chart, params, box, tol):
            table[idx] = src
            continue
        first, second = (src, other[0]) if idx < swapped else (other[0], src)
        table[idx] = f"(({first}) + ({second}))/2"
        if idx < swapped:
            warnings.append(f"{where}: entries {tuple(i + 1 for i in idx)} and "
                            f"{tuple(i + 1 for i in swapped)} disagree; symmetrized to their average")
    return table


def _full_table(entries, n, rank, chart, params, where):
    table = np.empty((n,) * rank, dtype=object)
    for pos, e in enumerate(entries):
        idx = tuple(int(e[k]) - 1 for k in ("i", "j", "k")[:rank])
        if any(i >= n for i in idx):
            raise SpecError(f"index out of range 1..{n}", f"{where}[{pos}]")
        if table[idx] is not None:
            raise SpecError(f"duplicate entry for {tuple(i + 1 for i in idx)}", f"{where}[{pos}]")
        _parse(str(e["expr"]), chart, params, f"{where}[{pos}].expr")
        table[idx] = str(e["expr"])
    return table


def _point(data, key, n):
    if key not in data:
        return None
    pt = tuple(float(v) for v in data[key])
    if len(pt) != n:
        raise SpecError(f"expected {n} coordinates", key)
    return pt


def spec_from_dict(data: Mapping) -> SpecFile:
    validate_spec_dict(data)
    coords = tuple(data["coordinates"])
    n = len(coords)
    params = {k: float(v) for k, v in data.get("params", {}).items()}
    clash = set(params) & set(coords)
    if clash or "p" in coords or "p" in params:
        raise SpecError(f"names {sorted(clash | ({'p'} & (set(coords) | set(params))))} are reserved "
                        f"or clash with coordinates", "params")
    box = np.asarray(data["box"], dtype=float)
    if box.shape != (n, 2):
        raise SpecError(f"box must give one interval per coordinate ({n})", "box")
    for i, (lo, hi) in enumerate(box):
        if not lo < hi:
            raise SpecError("empty interval", f"box[{i}]")
    chk = data.get("check", {})
    settings = CheckSettings(**{k: chk[k] for k in ("seed", "samples", "tol_abs", "tol_rel", "order") if k in chk})
    warnings: list[str] = []
    sym_tol = max(settings.tol_abs, settings.tol_rel)

    fields = {}
    for name, comps in sorted(data.get("fields", {}).items()):
        if len(comps) != n:
            raise SpecError(f"vector field needs {n} components", f"fields.{name}")
        for i, src in enumerate(comps):
            _parse(str(src), coords, params, f"fields.{name}[{i}]")
        fields[name] = ExprTensor.from_strings(list(comps), coords, params)

    expansion = None
    if "expansion" in data:
        ex = data["expansion"]
        if len(ex["fields"]) != len(ex["signs"]):
            raise SpecError("one sign per field is required", "expansion.signs")
        for k, name in enumerate(ex["fields"]):
            if name not in fields:
                raise SpecError(f"unknown vector field '{name}'", f"expansion.fields[{k}]")
        expansion = Expansion(tuple(ex["fields"]), tuple(int(s) for s in ex["signs"]),
                              ex.get("pairing", "first"))

    manifold = None
    if "structure" in data:
        c_table = _symmetric_table(data["structure"], n, 3, coords, params, box, "structure", warnings, sym_tol)
        metric = None
        if "metric" in data:
            g_table = _symmetric_table(data["metric"], n, 2, coords, params, box, "metric", warnings, sym_tol)
            metric = ExprTensor.from_strings(g_table, coords, params)
        connection = None
        if "connection" in data:
            connection = ExprTensor.from_strings(
                _full_table(data["connection"], n, 3, coords, params, "connection"), coords, params)
        manifold = ManifoldSpec(
            name=data["name"], coords=coords, structure=ExprTensor.from_strings(c_table, coords, params),
            box=box, metric=metric, connection=connection, vector_fields=fields,
            canonical=bool(data.get("canonical", False)), base_point=_point(data, "base_point", n),
            witness=_point(data, "witness", n), params=params, description=data.get("description", ""))
    elif "metric" in data or "connection" in data:
        raise SpecError("a metric or connection needs structure constants", "structure")

    lax = phi = phi_src = None
    M = 5
    if "lax" in data:
        lax, phi, phi_src, M = _lax_from_dict(data["lax"], coords, params)
    if manifold is None and lax is None:
        raise SpecError("the file must give structure constants or a Lax function", "structure")

    return SpecFile(name=data["name"], coords=coords, box=box, manifold=manifold, lax=lax,
                    phi=phi, phi_source=phi_src, moments=M, fields=fields, expansion=expansion,
                    settings=settings, description=data.get("description", ""),
                    warnings=warnings, raw=dict(data))


def _lax_from_dict(lx: Mapping, coords, params):
    from .benney import LaxFamily, parse_phi

    kind = lx["kind"]
    n = len(coords)
    for key in ("poles", "points", "singular"):
        for k, src in enumerate(lx.get(key, [])):
            _parse(str(src), coords, params, f"lax.{key}[{k}]")
    try:
        if kind == "rational":
            for k, src in enumerate(lx["weights"]):
                _parse(str(src), coords, params, f"lax.weights[{k}]")
            L = LaxFamily.rational(coords, lx["poles"], [str(w) for w in lx["weights"]], params)
        elif kind == "logarithmic":
            L = LaxFamily.logarithmic(coords, lx["points"], lx["weights"], params)
        else:
            _parse(str(lx["lambda"]), coords, params, "lax.lambda", allow_p=True)
            L = LaxFamily.expression(coords, lx["lambda"], lx.get("singular", []), params,
                                     strict=lx.get("asymptotics", "strict") == "strict")
    except (ExprSyntaxError, UnknownIdentifierError) as exc:
        raise SpecError(str(exc), "lax") from exc
    if "asymptotics" in lx:
        L.strict = lx["asymptotics"] == "strict"
    if "window" in lx:
        L.window = float(lx["window"])
    phi = phi_src = None
    if "phi" in lx:
        if len(lx["phi"]) != n:
            raise SpecError(f"one twist function per coordinate ({n}) is required", "lax.phi")
        try:
            phi = parse_phi(lx["phi"], params)
        except (ExprSyntaxError, UnknownIdentifierError) as exc:
            raise SpecError(str(exc), "lax.phi") from exc
        phi_src = tuple(str(s) for s in lx["phi"])
    return L, phi, phi_src, int(lx.get("moments", 5))
