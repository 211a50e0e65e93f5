"""Command-line interface: ``fman check | hierarchy | benney | fixtures``.

Exit status: 0 when every check passes, 1 when a check fails, 2 on input
errors (unreadable or invalid specification, inapplicable suite).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .benney import parse_phi
from .errors import ExprSyntaxError, FmanError, InapplicableSuiteError, SpecError, UnknownIdentifierError
from .report import FAIL, POINT_ERRORS, dumps, render_text
from .specio import (SpecFile, fixture_names, fixture_text, load_fixture, load_spec, loads_spec,
                     validator)
from .suites import SUITES, make_context, run_in_context

EXIT_PASS, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
REPORT_SCHEMA = "fman-report-1.schema.json"


class InputError(FmanError):
    """Bad command-line input (exit status 2)."""


# -- argument parsing ---------------------------------------------------------

def _common(p: argparse.ArgumentParser, suite: bool = False) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--spec", metavar="PATH", help="specification file (fman-spec/1)")
    src.add_argument("--fixture", metavar="NAME", help="a shipped fixture instead of a file")
    if suite:
        p.add_argument("--suite", default="all", choices=SUITES, help="check suite (default: all)")
    p.add_argument("--seed", type=int, help="sampler seed (default 42, or the file's setting)")
    p.add_argument("--samples", type=int, help="number of sample points (default 32)")
    p.add_argument("--tol-abs", type=float, help="absolute tolerance (default 1e-9)")
    p.add_argument("--tol-rel", type=float, help="tolerance relative to the size of the terms (default 1e-9)")
    p.add_argument("--order", type=int, help="truncation order K of the series (default 8)")
    p.add_argument("--out", metavar="PATH", help="write the JSON report to PATH")
    p.add_argument("--json", action="store_true", help="print the JSON report instead of the summary")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fman", description="Verify F-manifold identities on sampled points.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="run a check suite")
    _common(p, suite=True)
    p.add_argument("--phi", action="append", metavar="EXPR",
                   help="twist function of r for a reduction (once per coordinate)")

    p = sub.add_parser("hierarchy", help="construct the principal hierarchy of a flat structure")
    _common(p)
    p.add_argument("--alpha-max", type=int, default=2, help="highest level α (default 2; 0: flat basis only)")
    p.add_argument("--p-max", type=int, help="number of flat fields used (default: all)")

    p = sub.add_parser("benney", help="assemble and check the structure of a Benney reduction")
    _common(p)
    p.add_argument("--phi", action="append", metavar="EXPR",
                   help="twist function of r (once per coordinate); default: the file's")

    p = sub.add_parser("fixtures", help="list or export the shipped fixtures")
    p.add_argument("name", nargs="?", help="fixture to print (or write with --out)")
    p.add_argument("--out", metavar="PATH", help="write the fixture file to PATH")
    return parser


# -- helpers --------------------------------------------------------------------

def _load(args) -> SpecFile:
    return load_fixture(args.fixture) if args.fixture else load_spec(args.spec)


def _settings(spec: SpecFile, args):
    for name in ("samples", "order"):
        value = getattr(args, name)
        if value is not None and value < 1:
            raise InputError(f"--{name} must be positive")
    for name in ("tol_abs", "tol_rel"):
        value = getattr(args, name)
        if value is not None and not value >= 0:
            raise InputError(f"--{name.replace('_', '-')} must be non-negative")
    return spec.settings.updated(seed=args.seed, samples=args.samples, tol_abs=args.tol_abs,
                                 tol_rel=args.tol_rel, order=args.order)


def _phi(spec: SpecFile, sources):
    if not sources:
        return "spec", None
    if spec.lax is None:
        raise InapplicableSuiteError("--phi needs a specification with a lax section")
    if len(sources) != spec.n:
        raise InputError(f"give one --phi per coordinate ({spec.n}), got {len(sources)}")
    try:
        return parse_phi(sources, spec.lax.params), list(sources)
    except (ExprSyntaxError, UnknownIdentifierError) as exc:
        raise InputError(f"--phi: {exc}") from exc


def _emit(doc: dict, args, extra: str = "") -> int:
    validator(REPORT_SCHEMA).validate(doc)
    text = dumps(doc)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    if args.json:
        sys.stdout.write(text)
    else:
        sys.stdout.write(render_text(doc) + extra)
    return EXIT_FAIL if doc["verdict"] == FAIL else EXIT_PASS


def _listify(a) -> list:
    return np.asarray(a, dtype=float).tolist()


# -- subcommands ------------------------------------------------------------------

def cmd_check(args) -> int:
    spec = _load(args)
    phi, phi_source = _phi(spec, args.phi)
    ctx = make_context(spec, _settings(spec, args), phi)
    return _emit(run_in_context(ctx, args.suite, phi_source), args)


def cmd_hierarchy(args) -> int:
    spec = _load(args)
    if args.alpha_max < 0:
        raise InputError("--alpha-max must be non-negative")
    if args.p_max is not None and not 1 <= args.p_max <= spec.n:
        raise InputError(f"--p-max must lie in 1..{spec.n}")
    ctx = make_context(spec, _settings(spec, args), alpha_max=args.alpha_max, p_max=args.p_max)
    try:
        has_connection = ctx.geometry().has_connection
    except POINT_ERRORS as exc:
        raise InputError(f"the reduction is not valid on the box: {exc}") from exc
    if not has_connection:
        raise InapplicableSuiteError("the hierarchy needs a metric or a connection")
    doc = run_in_context(ctx, "flat")
    extra = ""
    if not ctx.is_flat() or ctx.recorder.results["flat.curvature"].verdict == FAIL:
        extra = ("the connection is not flat, so there is no principal hierarchy; "
                 "run `fman check --suite compat` to test the weaker compatibility conditions\n")
    elif ctx._hierarchy is not None:
        h = ctx._hierarchy
        table = h.to_dict()
        table.update(alpha_max=args.alpha_max, p_max=args.p_max or spec.n, coordinates=list(ctx.geometry().coords))
        doc["artifacts"] = {"hierarchy": table}
        extra = f"hierarchy: {len(h.fields)} series {', '.join(f'X({p},{a})' for p, a in h.labels())}\n"
    return _emit(doc, args, extra)


def _reduction_artifact(spec: SpecFile, ctx, phi_source) -> dict:
    geo = ctx.geometry()
    samples = []
    for r in ctx.points():
        try:
            u = geo.u_of_r(r)
            t = geo.tensors(r, 0)
            v = geo.chart(r, 2).v
        except POINT_ERRORS:
            continue
        samples.append({"r": _listify(r), "u": _listify(u), "velocities": _listify(v),
                        "metric": _listify(t.g.value), "structure": _listify(t.c.value)})
    return {
        "kind": "reduction",
        "lax": spec.lax.to_dict(),
        "twist": phi_source,
        "u_coordinates": list(spec.coords),
        "coordinates": list(geo.coords),
        "u_box": _listify(spec.box),
        "box": _listify(geo.box),
        "canonical": bool(geo.canonical),
        "index_convention": "metric[a][b] = g_ab, structure[a][b][c] = c^a_bc",
        "samples": samples,
    }


def cmd_benney(args) -> int:
    spec = _load(args)
    if spec.lax is None:
        raise InapplicableSuiteError("the 'benney' command needs a lax section")
    phi, phi_source = _phi(spec, args.phi)
    if phi == "spec":
        phi_source = None if spec.phi_source is None else list(spec.phi_source)
    ctx = make_context(spec, _settings(spec, args), phi)
    doc = run_in_context(ctx, "all", phi_source)
    if ctx._geo is not None:
        doc["artifacts"] = {"reduction": _reduction_artifact(spec, ctx, phi_source)}
    return _emit(doc, args)


def cmd_fixtures(args) -> int:
    if args.name is None:
        for name in fixture_names():
            spec = load_fixture(name)
            summary = spec.description.strip().splitlines()[0] if spec.description.strip() else ""
            sys.stdout.write(f"{name:<20} n={spec.n}  {summary}\n")
        return EXIT_PASS
    text = fixture_text(args.name)
    loads_spec(text)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_PASS


COMMANDS = {"check": cmd_check, "hierarchy": cmd_hierarchy, "benney": cmd_benney, "fixtures": cmd_fixtures}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (SpecError, InapplicableSuiteError, InputError) as exc:
        sys.stderr.write(f"fman: error: {exc}\n")
        return EXIT_INPUT
    except OSError as exc:
        sys.stderr.write(f"fman: error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
