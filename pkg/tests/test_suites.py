import json

import pytest

from conftest import EXPECTED_FAILURES, REDUCTIONS, checks_of
from fmanifold.errors import InapplicableSuiteError
from fmanifold.specio import fixture_names, load_fixture, validator
from fmanifold.suites import SUITES, make_context, run_in_context, run_suite, spec_digest


def test_every_fixture_has_its_expected_verdict(full_reports):
    for name in fixture_names():
        status, _, doc = full_reports[name]
        expected = "fail" if name in EXPECTED_FAILURES else "pass"
        assert doc["verdict"] == expected, name
        assert status == (1 if expected == "fail" else 0)
        validator("fman-report-1.schema.json").validate(doc)


def test_reports_record_the_environment(full_reports):
    _, _, doc = full_reports["dkdv-frobenius"]
    env = doc["environment"]
    assert env["seed"] == 42 and env["samples"] == 32 and env["series_order"] == 8
    assert env["sampler"].startswith("numpy.random.default_rng")
    assert doc["spec"]["digest"] == spec_digest(load_fixture("dkdv-frobenius"))
    names = [c["name"] for c in doc["checks"]]
    assert names == sorted(names)


def test_frobenius_fixture_passes_all_suites(full_reports):
    checks = checks_of(full_reports["dkdv-frobenius"][2])
    assert checks["flat.curvature"]["verdict"] == "pass"
    assert checks["flat.hierarchy.commutativity"]["verdict"] == "pass"
    assert {c["verdict"] for c in checks.values()} <= {"pass", "info", "skip"}


def test_broken_fixture_fails_hertling_manin_with_witness():
    doc = run_suite(load_fixture("broken-hm"), "algebra")
    hm = checks_of(doc)["algebra.hertling_manin"]
    assert hm["verdict"] == "fail"
    assert len(hm["witness"]["point"]) == 3 and hm["witness"]["residual"] > 1e-3
    assert checks_of(doc)["algebra.hertling_manin_at_witness"]["max_residual"] == pytest.approx(0.5)


def test_inapplicable_suites_raise():
    with pytest.raises(InapplicableSuiteError):
        run_suite(load_fixture("canonical-trivial"), "benney")
    with pytest.raises(InapplicableSuiteError):
        run_suite(load_fixture("broken-hm"), "compat")


def test_all_suite_skips_what_does_not_apply(full_reports):
    names = {c["name"].split(".")[0] for c in full_reports["broken-hm"][2]["checks"]}
    assert names == {"algebra", "flows"}
    assert full_reports["broken-hm"][2]["environment"]["suites"] == ["algebra", "flows"]


@pytest.mark.parametrize("name", REDUCTIONS)
def test_reductions_pass_every_suite(full_reports, name):
    checks = checks_of(full_reports[name][2])
    for prefix in ("algebra", "flows", "compat", "riemannian", "benney", "reduction"):
        assert any(k.startswith(prefix + ".") for k in checks), prefix
    failed = [k for k, c in checks.items() if c["verdict"] == "fail"]
    assert failed == []


def test_curvature_of_reduction_metrics(full_reports):
    """Two reductions are curved, the logarithmic one is flat; the flat suite runs only where R = 0."""
    curv = {n: checks_of(full_reports[n][2])["compat.curvature"]["max_residual"] for n in REDUCTIONS}
    assert curv["power-2"] > 1e-4 and curv["power-3"] > 1e-4
    assert curv["log-3"] < 1e-10 and curv["zakharov-2"] < 1e-10
    assert "flat.curvature" in checks_of(full_reports["log-3"][2])
    assert "flat.curvature" not in checks_of(full_reports["power-3"][2])


def test_hyperbolic_fixture_fails_only_compatibility_with_the_product(full_reports):
    checks = checks_of(full_reports["hyperbolic-qexp"][2])
    failed = sorted(k for k, c in checks.items() if c["verdict"] == "fail")
    assert failed == ["compat.admissible.X", "compat.canonical_identities.first", "compat.deformed_curvature",
                      "compat.scc", "riemannian.egorov.potential"]
    assert checks["riemannian.expansion"]["verdict"] == "pass"


def test_single_suites_are_subsets_of_all(full_reports):
    spec = load_fixture("canonical-trivial")
    full = checks_of(full_reports["canonical-trivial"][2])
    for suite in ("algebra", "compat", "riemannian"):
        doc = run_suite(spec, suite)
        assert doc["suite"] == suite
        for k, c in checks_of(doc).items():
            assert k.startswith(suite + ".")
            assert c == full[k]


def test_context_reuse_gives_identical_reports():
    spec = load_fixture("dkdv-frobenius")
    a = json.dumps(run_in_context(make_context(spec), "flat"), sort_keys=True)
    b = json.dumps(run_suite(spec, "flat"), sort_keys=True)
    assert a == b


def test_suite_names():
    assert SUITES[-1] == "all" and len(SUITES) == 7
