"""Shared fixtures: shipped specifications, full-suite reports and the acceptance summary."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from fmanifold.cli import main
from fmanifold.fields import ExprTensor
from fmanifold.manifold import ManifoldSpec
from fmanifold.specio import fixture_names, load_fixture

ACCEPTANCE: dict[int, list[tuple[str, bool]]] = {}

REDUCTIONS = ("zakharov-2", "log-3", "power-2", "power-3")
EXPECTED_FAILURES = {"broken-hm", "hyperbolic-qexp"}
CHART3 = ("r1", "r2", "r3")


def record_clause(criterion: int, clause: str, ok: bool) -> None:
    """Register one clause of an acceptance criterion for the end-of-run summary."""
    ACCEPTANCE.setdefault(criterion, []).append((clause, bool(ok)))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        clauses = ACCEPTANCE[k]
        ok = all(c for _, c in clauses)
        failed = [name for name, c in clauses if not c]
        detail = f"{len(clauses)} clause{'s' if len(clauses) != 1 else ''}" if ok else "failed: " + "; ".join(failed)
        tr.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} ({detail})")


@pytest.fixture(scope="session")
def report_dir(tmp_path_factory) -> Path:
    return tmp_path_factory.mktemp("reports")


@pytest.fixture(scope="session")
def full_reports(report_dir):
    """``check --suite all --seed 42`` on every shipped fixture, run once through the CLI.

    Maps fixture name to ``(exit status, report bytes, report document)``.
    """
    out = {}
    for name in fixture_names():
        path = report_dir / f"{name}.json"
        status = main(["check", "--fixture", name, "--suite", "all", "--seed", "42",
                       "--out", str(path), "--json"])
        data = path.read_bytes()
        out[name] = (status, data, json.loads(data))
    return out


def checks_of(doc: dict) -> dict:
    return {c["name"]: c for c in doc["checks"]}


@pytest.fixture(scope="session")
def specs():
    return {name: load_fixture(name) for name in fixture_names()}


def _canonical_structure(n, coords):
    table = [[[None] * n for _ in range(n)] for _ in range(n)]
    for i in range(n):
        table[i][i][i] = "1"
    return ExprTensor.from_strings(table, coords)


def potential_metric_manifold(seed, eps=0.15):
    """Canonical product with ``g_ii = ∂_i F`` for ``F = Σ r^i`` plus random cubic terms."""
    rng = np.random.default_rng(seed)
    monomials = [(a, b, 3 - a - b) for a in range(4) for b in range(4 - a)]
    coef = eps * rng.uniform(-1, 1, len(monomials))
    diag = []
    for i in range(3):
        terms = ["1"]
        for k, e in zip(coef, monomials):
            if e[i] == 0:
                continue
            d = list(e)
            d[i] -= 1
            factors = [f"({float(k * e[i])!r})"] + [f"r{j + 1}^{p}" for j, p in enumerate(d) if p]
            terms.append("*".join(factors))
        diag.append(" + ".join(terms))
    metric = [[diag[i] if i == j else None for j in range(3)] for i in range(3)]
    return ManifoldSpec(name=f"potential-{seed}", coords=CHART3, box=[[-0.3, 0.3]] * 3,
                        structure=_canonical_structure(3, CHART3),
                        metric=ExprTensor.from_strings(metric, CHART3), canonical=True)
