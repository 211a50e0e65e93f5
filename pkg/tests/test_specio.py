import numpy as np
import pytest

from fmanifold.errors import SpecError
from fmanifold.specio import fixture_names, fixture_text, load_fixture, load_spec, loads_spec

MINIMAL = """
format = "fman-spec/1"
name = "t"
coordinates = ["u1", "u2"]
box = [[0.1, 0.5], [0.8, 1.5]]
structure = [
  { i = 1, j = 1, k = 1, expr = "1" },
  { i = 2, j = 1, k = 2, expr = "1" },
  { i = 2, j = 2, k = 1, expr = "1" },
]
"""


def with_structure(extra):
    return MINIMAL.replace('  { i = 1, j = 1, k = 1, expr = "1" },', '  { i = 1, j = 1, k = 1, expr = "1" },\n' + extra)


def test_shipped_fixtures_load():
    assert set(fixture_names()) >= {"dkdv-frobenius", "broken-hm", "canonical-trivial", "zakharov-2", "log-3"}
    for name in fixture_names():
        spec = load_fixture(name)
        assert spec.name == name
        assert spec.warnings == []
        assert spec.path == f"fixture:{name}"


def test_frobenius_fixture_contents():
    spec = load_fixture("dkdv-frobenius")
    m = spec.manifold
    assert spec.n == 2 and m.coords == ("u1", "u2")
    # c^1_11, c^1_22, c^2_12 = c^2_21
    assert len(m.structure._nonzero) == 4
    c = m.c((0.3, 1.2), 0).value
    assert c[0, 1, 1] == pytest.approx(1.2) and c[1, 0, 1] == c[1, 1, 0] == 1.0
    assert m.base_point == (0.0, 0.0)
    assert set(m.vector_fields) == {"e", "position"}


def test_lower_indices_are_symmetrized():
    m = loads_spec(MINIMAL).manifold
    c = m.c((0.2, 1.0), 0).value
    assert c[1, 0, 1] == c[1, 1, 0] == 1.0


def test_asymmetric_entries_warn_and_average():
    spec = loads_spec(with_structure('  { i = 1, j = 1, k = 2, expr = "u1" },\n  { i = 1, j = 2, k = 1, expr = "u2" },'))
    assert len(spec.warnings) == 1 and "disagree" in spec.warnings[0]
    c = spec.manifold.c((0.2, 1.0), 0).value
    assert c[0, 0, 1] == pytest.approx(0.6)
    agreeing = loads_spec(with_structure('  { i = 1, j = 1, k = 2, expr = "u1*2" },\n  { i = 1, j = 2, k = 1, expr = "2*u1" },'))
    assert agreeing.warnings == []


@pytest.mark.parametrize("text, path, message", [
    (MINIMAL.replace("i = 1, j = 1, k = 1", "i = 0, j = 1, k = 1"), "structure", "schema"),
    (MINIMAL.replace("i = 1, j = 1, k = 1", "i = 3, j = 1, k = 1"), "structure[0]", "out of range"),
    (with_structure('  { i = 1, j = 1, k = 1, expr = "2" },'), "structure[1]", "duplicate"),
    (MINIMAL.replace('expr = "1" },\n  { i = 2, j = 1', 'expr = "u3" },\n  { i = 2, j = 1'),
     "structure[0].expr", "unknown identifier 'u3'"),
    (MINIMAL.replace('expr = "1" },\n  { i = 2, j = 1', 'expr = "u1 +" },\n  { i = 2, j = 1'),
     "structure[0].expr", "line 1"),
    (MINIMAL.replace('"fman-spec/1"', '"fman-spec/2"'), "format", "schema"),
    (MINIMAL.replace("[0.8, 1.5]]", "[0.8, 1.5], [0.0, 1.0]]"), "box", "interval per coordinate"),
    (MINIMAL.replace("[0.8, 1.5]", "[1.5, 0.8]"), "box[1]", "empty"),
    (MINIMAL + 'metric = [{ i = 1, j = 2, expr = "1" }]\n[fields]\nX = ["1"]\n', "fields.X", "2 components"),
])
def test_invalid_files_are_located(text, path, message):
    with pytest.raises(SpecError) as info:
        loads_spec(text)
    assert path in str(info.value)
    assert message in str(info.value)


def test_toml_syntax_errors_carry_a_location():
    with pytest.raises(SpecError, match=r"syntax error.*line 3"):
        loads_spec('format = "fman-spec/1"\nname = "t"\ncoordinates = [u1]\nbox = []\n')


def test_metric_needs_structure():
    text = """
format = "fman-spec/1"
name = "t"
coordinates = ["u1", "u2"]
box = [[0.1, 0.5], [0.8, 1.5]]
metric = [{ i = 1, j = 2, expr = "1" }]
"""
    with pytest.raises(SpecError, match="structure"):
        loads_spec(text)


def test_missing_files_and_fixtures(tmp_path):
    with pytest.raises(SpecError, match="no such file"):
        load_spec(tmp_path / "absent.toml")
    with pytest.raises(SpecError, match="available"):
        fixture_text("absent")
    p = tmp_path / "t.toml"
    p.write_text(MINIMAL, encoding="utf-8")
    assert load_spec(p).path == str(p)


def test_parameters_and_reserved_names():
    text = MINIMAL.replace('expr = "1" },\n  { i = 2, j = 1', 'expr = "a*u1" },\n  { i = 2, j = 1') + "[params]\na = 3.0\n"
    m = loads_spec(text).manifold
    assert m.c((0.2, 1.0), 0).value[0, 0, 0] == pytest.approx(0.6)
    with pytest.raises(SpecError, match="reserved"):
        loads_spec(MINIMAL + "[params]\nu1 = 1.0\n")


def test_reduction_fixture_has_lax_and_box():
    spec = load_fixture("zakharov-2")
    assert spec.manifold is None and spec.lax is not None
    np.testing.assert_allclose(spec.box, [[0.1, 0.5], [-0.5, 0.5]])
    assert spec.geometry() is spec.geometry()
