import json
import math

import numpy as np
import pytest

from fmanifold.errors import EvaluationError
from fmanifold.fields import Residual
from fmanifold.report import (CheckRecorder, Tolerance, build_report, dumps, overall_verdict,
                              render_text)
from fmanifold.specio import validator

POINTS = np.linspace(0.0, 1.0, 20)[:, None]


def spec_info():
    return {"name": "t", "dimension": 1, "coordinates": ["x"], "digest": "0" * 64, "lax": None, "twist": None}


def environment():
    return {"seed": 42, "samples": 20, "series_order": 8, "tol_abs": 1e-9, "tol_rel": 1e-9,
            "jet_orders": {"structure": 1}, "random_fields": {}, "suites": ["algebra"]}


def test_tolerance_rule():
    tol = Tolerance(1e-9, 1e-6)
    assert tol.passes(Residual(1e-9 + 1e-6 * 2.0, 2.0))
    assert not tol.passes(Residual(1.1e-9 + 1e-6 * 2.0, 2.0))
    assert tol.ratio(Residual(0.0, 0.0)) == 0.0
    assert Tolerance(0.0, 0.0).ratio(Residual(1.0, 0.0)) == math.inf


def test_pointwise_pass_and_witness_of_worst_point():
    rec = CheckRecorder()
    rec.pointwise("a.ok", POINTS, lambda x: Residual(0.0, 1.0))
    out = rec.pointwise("a.bad", POINTS, lambda x: Residual(float(x[0]) * 1e-3, 1.0), chart=("x",))
    r = out["a.bad"]
    assert rec.results["a.ok"].verdict == "pass"
    assert r.verdict == "fail" and r.failures == 19 and r.points == 20
    assert r.witness == {"index": 19, "point": [1.0], "residual": 1e-3, "scale": 1.0, "coordinates": ["x"]}
    assert r.max_residual == pytest.approx(1e-3)


def test_mapping_outcomes_give_one_check_per_key():
    rec = CheckRecorder()
    made = rec.pointwise("m", POINTS, lambda x: {"first": Residual(0, 1), "second": [Residual(0, 1)] * 2})
    assert set(made) == {"m.first", "m.second"}
    with pytest.raises(ValueError, match="twice"):
        rec.pointwise("m", POINTS, lambda x: {"first": Residual(0, 1)})


def _sometimes_raises(limit):
    def fn(x):
        if x[0] < limit:
            raise EvaluationError("outside the domain", point=x)
        return Residual(0.0, 1.0)
    return fn


def test_evaluation_errors_up_to_ten_percent_are_tolerated():
    rec = CheckRecorder()
    ok = rec.pointwise("e.two", POINTS, _sometimes_raises(0.1))["e.two"]      # 2 of 20 points
    assert ok.verdict == "pass" and ok.errors == 2
    assert "2 of 20 points could not be evaluated" in ok.note
    bad = rec.pointwise("e.three", POINTS, _sometimes_raises(0.15))["e.three"]  # 3 of 20
    assert bad.verdict == "fail" and bad.errors == 3
    assert bad.witness["index"] == 0 and "outside the domain" in bad.witness["error"]
    every = rec.pointwise("e.all", POINTS, _sometimes_raises(2.0))["e.all"]
    assert every.verdict == "fail"


def test_info_skip_and_verdict_entries():
    rec = CheckRecorder()
    rec.pointwise("i", POINTS, lambda x: Residual(5.0, 1.0), info=True)
    rec.skip("s", "not applicable")
    rec.verdict("v", False, value=1.0, witness={"index": 3})
    rec.residual("r", Residual(float("nan"), 1.0))
    assert rec.results["i"].verdict == "info" and rec.results["i"].witness["residual"] == 5.0
    assert rec.results["s"].verdict == "skip"
    assert overall_verdict(rec.results.values()) == "fail"
    d = rec.results["r"].to_dict()
    assert d["max_residual"] is None and d["verdict"] == "fail"


def test_error_entry_takes_point_from_exception():
    rec = CheckRecorder()
    r = rec.error("x", EvaluationError("singular", point=(0.5,)))
    assert r.verdict == "fail" and r.witness["point"] == [0.5]


def test_report_document_validates_and_is_canonical():
    rec = CheckRecorder()
    rec.pointwise("b.check", POINTS, lambda x: Residual(0.0, 1.0), chart=("x",))
    rec.pointwise("a.check", POINTS, lambda x: Residual(float(x[0]), 1.0), chart=("x",))
    rec.skip("c.check", "n/a")
    doc = build_report(spec_info(), "algebra", environment(), rec.results, warnings=["w"])
    validator("fman-report-1.schema.json").validate(doc)
    assert [c["name"] for c in doc["checks"]] == ["a.check", "b.check", "c.check"]
    assert doc["summary"] == {"pass": 1, "fail": 1, "info": 0, "skip": 1, "total": 3}
    assert doc["verdict"] == "fail"
    text = dumps(doc)
    assert text == dumps(json.loads(text)) and text.endswith("\n")
    rendered = render_text(doc)
    assert "witness:" in rendered and "warning: w" in rendered and rendered.startswith("t: suite 'algebra'")


def test_schema_rejects_malformed_reports():
    rec = CheckRecorder()
    rec.skip("ok.name", "n/a")
    doc = build_report(spec_info(), "algebra", environment(), rec.results)
    v = validator("fman-report-1.schema.json")
    for mutate in (lambda d: d.update(verdict="maybe"),
                   lambda d: d["checks"][0].update(name="Bad Name"),
                   lambda d: d["checks"][0].update(extra=1),
                   lambda d: d["spec"].update(digest="xyz"),
                   lambda d: d.pop("summary")):
        bad = json.loads(dumps(doc))
        mutate(bad)
        assert not v.is_valid(bad)
