import json
import subprocess
import sys

import pytest

from fmanifold.cli import EXIT_FAIL, EXIT_INPUT, EXIT_PASS, main
from fmanifold.specio import fixture_names, fixture_text, validator

SCHEMA = "fman-report-1.schema.json"


def run(capsys, *argv):
    status = main(list(argv))
    out = capsys.readouterr()
    return status, out.out, out.err


def test_check_passes_on_frobenius_fixture(capsys):
    status, out, _ = run(capsys, "check", "--fixture", "dkdv-frobenius", "--suite", "algebra")
    assert status == EXIT_PASS
    assert out.startswith("dkdv-frobenius: suite 'algebra' (seed 42, 32 samples)")
    assert "PASS:" in out.splitlines()[-1]


def test_check_reports_failure_with_witness(capsys, tmp_path):
    path = tmp_path / "r.json"
    status, out, _ = run(capsys, "check", "--fixture", "broken-hm", "--suite", "algebra",
                         "--json", "--out", str(path))
    assert status == EXIT_FAIL
    doc = json.loads(out)
    assert path.read_text(encoding="utf-8") == out
    validator(SCHEMA).validate(doc)
    hm = {c["name"]: c for c in doc["checks"]}["algebra.hertling_manin"]
    assert hm["verdict"] == "fail"
    assert set(hm["witness"]) >= {"index", "point", "residual", "scale", "coordinates"}


def test_options_reach_the_environment(capsys):
    status, out, _ = run(capsys, "check", "--fixture", "dkdv-frobenius", "--suite", "algebra", "--json",
                         "--seed", "7", "--samples", "5", "--tol-abs", "1e-10", "--tol-rel", "1e-8",
                         "--order", "4")
    env = json.loads(out)["environment"]
    assert (env["seed"], env["samples"], env["tol_abs"], env["tol_rel"], env["series_order"]) == \
        (7, 5, 1e-10, 1e-8, 4)
    assert all(c["points"] in (0, 1, 5) for c in json.loads(out)["checks"])


@pytest.mark.parametrize("argv, message", [
    (["check", "--spec", "/nonexistent/x.toml"], "no such file"),
    (["check", "--fixture", "nope"], "no fixture named"),
    (["check", "--fixture", "dkdv-frobenius", "--samples", "0"], "--samples"),
    (["check", "--fixture", "dkdv-frobenius", "--tol-abs", "-1"], "--tol-abs"),
    (["check", "--fixture", "canonical-trivial", "--suite", "benney"], "benney"),
    (["check", "--fixture", "dkdv-frobenius", "--phi", "r"], "lax"),
    (["check", "--fixture", "zakharov-2", "--phi", "r"], "one --phi per coordinate"),
    (["check", "--fixture", "zakharov-2", "--phi", "r +", "--phi", "1"], "--phi"),
    (["benney", "--fixture", "canonical-trivial"], "lax"),
    (["hierarchy", "--fixture", "dkdv-frobenius", "--p-max", "3"], "--p-max"),
    (["hierarchy", "--fixture", "broken-hm"], "metric or a connection"),
])
def test_input_errors_exit_with_status_two(capsys, argv, message):
    status, out, err = run(capsys, *argv)
    assert status == EXIT_INPUT
    assert message in err and out == ""


def test_invalid_spec_file_is_an_input_error(capsys, tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text(fixture_text("dkdv-frobenius").replace('expr = "u2"', 'expr = "u3"'), encoding="utf-8")
    status, _, err = run(capsys, "check", "--spec", str(bad))
    assert status == EXIT_INPUT and "unknown identifier 'u3'" in err and "structure[1].expr" in err


def test_argparse_rejects_unknown_suite():
    with pytest.raises(SystemExit) as info:
        main(["check", "--fixture", "dkdv-frobenius", "--suite", "bogus"])
    assert info.value.code == 2


def test_hierarchy_command(capsys, tmp_path):
    path = tmp_path / "h.json"
    status, out, _ = run(capsys, "hierarchy", "--fixture", "dkdv-frobenius", "--out", str(path))
    assert status == EXIT_PASS
    assert "hierarchy: 6 series X(1,0), X(1,1), X(1,2), X(2,0), X(2,1), X(2,2)" in out
    table = json.loads(path.read_text(encoding="utf-8"))["artifacts"]["hierarchy"]
    assert table["alpha_max"] == 2 and table["p_max"] == 2 and table["coordinates"] == ["u1", "u2"]
    status, out, _ = run(capsys, "hierarchy", "--fixture", "dkdv-frobenius", "--alpha-max", "0", "--json")
    doc = json.loads(out)
    assert status == EXIT_PASS and len(doc["artifacts"]["hierarchy"]["fields"]) == 2
    assert doc["environment"]["hierarchy"] == {"alpha_max": 0, "p_max": None}


def test_hierarchy_refuses_curved_connections(capsys):
    status, out, _ = run(capsys, "hierarchy", "--fixture", "hyperbolic-qexp")
    assert status == EXIT_FAIL
    assert "not flat" in out and "fman check --suite compat" in out


def test_benney_command_exports_the_reduction(capsys):
    status, out, _ = run(capsys, "benney", "--fixture", "zakharov-2", "--samples", "6", "--json")
    assert status == EXIT_PASS
    red = json.loads(out)["artifacts"]["reduction"]
    assert red["coordinates"] == ["r1", "r2"] and red["u_coordinates"] == ["u1", "u2"]
    assert red["canonical"] is True and red["twist"] is None
    assert len(red["samples"]) == 6
    s = red["samples"][0]
    u1, u2 = s["u"]
    assert s["r"] == pytest.approx([u2 - 2 * u1 ** 0.5, u2 + 2 * u1 ** 0.5])


def test_benney_twist_from_the_command_line(capsys):
    status, out, _ = run(capsys, "benney", "--fixture", "zakharov-2", "--samples", "4", "--json",
                         "--phi", "1 + r^2", "--phi", "exp(r)")
    doc = json.loads(out)
    assert doc["spec"]["twist"] == ["1 + r^2", "exp(r)"]
    assert doc["artifacts"]["reduction"]["canonical"] is False
    assert status in (EXIT_PASS, EXIT_FAIL)
    assert doc["verdict"] == ("fail" if status else "pass")


def test_benney_rejects_an_invalid_box(capsys, tmp_path):
    p = tmp_path / "neg.toml"
    p.write_text(fixture_text("zakharov-2").replace("[[0.1, 0.5]", "[[-0.2, 0.5]"), encoding="utf-8")
    status, out, _ = run(capsys, "benney", "--spec", str(p), "--json")
    assert status == EXIT_FAIL
    failed = [c for c in json.loads(out)["checks"] if c["verdict"] == "fail"]
    assert failed and any(c["witness"] and "point" in c["witness"] for c in failed)


def test_fixtures_list_and_export(capsys, tmp_path):
    status, out, _ = run(capsys, "fixtures")
    assert status == EXIT_PASS
    assert [line.split()[0] for line in out.splitlines()] == fixture_names()
    status, out, _ = run(capsys, "fixtures", "log-3")
    assert out == fixture_text("log-3")
    path = tmp_path / "f.toml"
    run(capsys, "fixtures", "log-3", "--out", str(path))
    assert path.read_text(encoding="utf-8") == fixture_text("log-3")
    status, _, err = run(capsys, "fixtures", "nope")
    assert status == EXIT_INPUT and "no fixture" in err


def test_console_script_module_entry():
    proc = subprocess.run([sys.executable, "-m", "fmanifold", "fixtures"], capture_output=True, text=True)
    assert proc.returncode == 0 and "dkdv-frobenius" in proc.stdout
