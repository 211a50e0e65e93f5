import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fmanifold import algebra
from fmanifold.algebra import V_jet
from fmanifold.errors import EvaluationError
from fmanifold.fields import ExprTensor, TensorJet
from fmanifold.flows import random_polynomial_field
from fmanifold.specio import load_fixture

DKDV = load_fixture("dkdv-frobenius").manifold
BROKEN = load_fixture("broken-hm").manifold
CANONICAL = load_fixture("canonical-trivial").manifold


def basis(n, i, order=2):
    v = np.zeros(n)
    v[i] = 1.0
    return algebra.constant_field(v, n, order)


@pytest.mark.parametrize("m", [DKDV, BROKEN, CANONICAL])
def test_fixture_products_are_commutative_and_associative(m):
    for x in m.sample(np.random.default_rng(1), 8):
        c = m.c(x, 0).value
        assert algebra.commutativity_residual(c).passes()
        assert algebra.associativity_residual(c).passes()


def test_random_structure_is_not_associative():
    c = np.random.default_rng(0).uniform(-1, 1, (3, 3, 3))
    c = c + c.transpose(0, 2, 1)
    assert algebra.commutativity_residual(c).passes()
    assert not algebra.associativity_residual(c).passes()
    assert not algebra.commutativity_residual(np.random.default_rng(1).uniform(-1, 1, (2, 2, 2))).passes()


def test_product_and_V():
    c = DKDV.c((0.3, 1.2), 0).value
    e = np.array([1.0, 0.0])
    X = np.array([0.4, -0.7])
    np.testing.assert_allclose(algebra.product(e, X, c), X)
    np.testing.assert_allclose(algebra.V_of(X, c) @ e, X)


def test_hertling_manin_on_fixtures():
    for x in DKDV.sample(np.random.default_rng(2), 5):
        assert algebra.hertling_manin_residual(DKDV.c(x, 1)).passes()
    r = algebra.hertling_manin_residual(BROKEN.c(BROKEN.witness, 1))
    assert r.value == pytest.approx(0.5)
    assert r.value > 1e-3


@pytest.mark.parametrize("m", [DKDV, BROKEN])
def test_component_form_is_intrinsic_form_on_basis(m):
    x = m.sample(np.random.default_rng(3), 1)[0]
    c = m.c(x, 1)
    n = m.n
    H = algebra.hertling_manin_array(c)
    for i in range(n):
        for mm in range(n):
            for j in range(n):
                for l in range(n):
                    got = algebra.hertling_manin_intrinsic(c, basis(n, i), basis(n, mm),
                                                           basis(n, j), basis(n, l))
                    np.testing.assert_allclose(got, H[:, i, j, l, mm], atol=1e-13)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_intrinsic_form_is_tensorial(seed):
    """On an F-manifold the nine-bracket form vanishes for arbitrary fields, not just constant ones."""
    rng = np.random.default_rng(seed)
    x = DKDV.sample(rng, 1)[0]
    c = DKDV.c(x, 1)
    X, Y, Z, W = (random_polynomial_field(rng, 2, 2).jet(x, 1) for _ in range(4))
    scale = max(1.0, max(np.max(np.abs(F.value)) for F in (X, Y, Z, W))) ** 4 * 10
    assert np.max(np.abs(algebra.hertling_manin_intrinsic(c, X, Y, Z, W))) < 1e-12 * scale


def test_haantjes_vanishes_for_diagonal_fields():
    V = ExprTensor.from_strings([["u1*u2*u3", None, None], [None, "u1^2 + u3", None],
                                 [None, None, "exp(u2)"]], ("u1", "u2", "u3")).jet((0.3, 0.6, 0.9), 1)
    assert np.max(np.abs(algebra.nijenhuis_tensor(V))) > 0.1
    assert algebra.haantjes_residual(V).passes(1e-13, 1e-13)


def test_haantjes_detects_generic_fields():
    rng = np.random.default_rng(5)
    V = random_polynomial_field(rng, 3, 2, shape=(3, 3)).jet((0.2, 0.1, -0.3), 1)
    assert not algebra.haantjes_residual(V).passes()


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_haantjes_of_V_Z_on_f_manifold(seed):
    rng = np.random.default_rng(seed)
    x = DKDV.sample(rng, 1)[0]
    Z = random_polynomial_field(rng, 2, 2).jet(x, 1)
    assert algebra.haantjes_residual(V_jet(DKDV.c(x, 1), Z)).passes()


def test_haantjes_of_V_Z_fails_on_broken_fixture():
    rng = np.random.default_rng(7)
    c = BROKEN.c(BROKEN.witness, 1)
    results = [algebra.haantjes_residual(V_jet(c, random_polynomial_field(rng, 3, 2).jet(BROKEN.witness, 1)))
               for _ in range(5)]
    assert not all(r.passes() for r in results)


@pytest.mark.parametrize("m, holds", [(DKDV, True), (BROKEN, False)])
def test_nijenhuis_rewriting_needs_hertling_manin(m, holds):
    rng = np.random.default_rng(11)
    worst = 0.0
    for x in m.sample(rng, 4):
        c = m.c(x, 1)
        X, Y, Z = (random_polynomial_field(rng, m.n, 2).jet(x, 1) for _ in range(3))
        direct = algebra.nijenhuis(V_jet(c, Z), X.value, Y.value)
        np.testing.assert_allclose(algebra.nijenhuis_of_product(c, X, Y, Z), direct, atol=1e-11)
        worst = max(worst, float(np.max(np.abs(algebra.nijenhuis_rewritten(c, X, Y, Z) - direct))))
    assert (worst < 1e-10) == holds


def test_unity():
    x = (0.3, 1.2)
    c = DKDV.c(x, 2)
    e = algebra.unity_jet(c)
    np.testing.assert_allclose(e.value, [1.0, 0.0], atol=1e-14)
    assert algebra.unity_residual(c.value, e.value).passes()
    assert algebra.lie_unity_residual(c, e.truncate(1)).passes()
    np.testing.assert_allclose(algebra.unity_field(np.array([[2.0, 4.0]])), [[0.5, 0.25]])
    with pytest.raises(EvaluationError):
        algebra.unity_field(np.array([[1.0, 0.0]]))
    with pytest.raises(EvaluationError):
        algebra.unity_jet(TensorJet.constant(np.zeros((2, 2, 2)), 2, 1))


def _diag_c(entries):
    table = [[[None] * 2 for _ in range(2)] for _ in range(2)]
    for (i, j, k), src in entries.items():
        table[i][j][k] = src
    return ExprTensor.from_strings(table, ("r1", "r2"))


def test_diagonal_structure_check():
    pts = [(0.3, 0.7), (1.1, -0.4)]
    good = _diag_c({(0, 0, 0): "1 + r1^2", (1, 1, 1): "exp(r2)"})
    chk = algebra.diagonal_structure_check([good.jet(p, 1) for p in pts])
    assert chk.passed
    np.testing.assert_allclose(chk.f[0], [1.09, np.exp(0.7)])
    coupled = _diag_c({(0, 0, 0): "1 + r2^2", (1, 1, 1): "1"})
    chk = algebra.diagonal_structure_check([coupled.jet(p, 1) for p in pts])
    assert chk.pattern.passes() and not chk.dependence.passes() and not chk.passed
    off = _diag_c({(0, 0, 0): "1", (1, 1, 1): "1", (0, 1, 1): "0.5"})
    chk = algebra.diagonal_structure_check([off.jet(p, 1) for p in pts])
    assert not chk.pattern.passes()
    assert chk.worst[1] == (1, 2, 2)


def test_eigen_gap():
    assert algebra.min_eigen_gap(np.diag([1.0, 1.5, 4.0])) == pytest.approx(0.5)
    assert algebra.min_eigen_gap(np.array([[2.0]])) == np.inf
