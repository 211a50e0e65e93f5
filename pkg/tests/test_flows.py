import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fmanifold import flows
from fmanifold.algebra import V_jet
from fmanifold.fields import ExprTensor, TensorJet
from fmanifold.flows import JetState, PolynomialField
from fmanifold.specio import load_fixture

DKDV = load_fixture("dkdv-frobenius").manifold
CANONICAL = load_fixture("canonical-trivial").manifold


def test_one_component_flows_always_commute():
    c = TensorJet.constant(np.ones((1, 1, 1)), 1, 2)
    rng = np.random.default_rng(0)
    for _ in range(5):
        X = flows.random_polynomial_field(rng, 1, 3).jet((0.4,), 2)
        Y = flows.random_polynomial_field(rng, 1, 3).jet((0.4,), 2)
        s = JetState.random(rng, (0.4,))
        assert flows.oracle_residual(X, Y, c, s).passes(1e-13, 1e-13)
        assert flows.iff_commutativity_residual(X, Y, c).passes(1e-13, 1e-13)


def test_decoupled_flows_commute_in_canonical_coordinates():
    rng = np.random.default_rng(1)
    x = CANONICAL.sample(rng, 1)[0]
    c = CANONICAL.c(x, 1)
    X = flows.decoupled_field(rng, 3, 3).jet(x, 1)
    Y = flows.decoupled_field(rng, 3, 3).jet(x, 1)
    for _ in range(5):
        assert flows.oracle_residual(X, Y, c, JetState.random(rng, x)).passes(1e-12, 1e-12)
    assert flows.sufficient_condition_residual(X, Y, c).passes(1e-12, 1e-12)
    assert flows.iff_commutativity_residual(X, Y, c).passes(1e-12, 1e-12)


def test_oracle_matches_explicit_commutator():
    """∂_τ(V_X u_x) − ∂_t(V_Y u_x) for simple flows, against the chain rule worked out by hand."""
    c = CANONICAL.c((0.5, 0.6, 0.7), 1)
    X = ExprTensor.from_strings(["u2", "0", "0"], ("u1", "u2", "u3")).jet((0.5, 0.6, 0.7), 1)
    Y = ExprTensor.from_strings(["0", "0", "1"], ("u1", "u2", "u3")).jet((0.5, 0.6, 0.7), 1)
    s = JetState(np.array([0.5, 0.6, 0.7]), np.array([1.0, 2.0, 3.0]), np.array([0.5, -1.0, 0.25]))
    # u1_t = u2 u1_x, u3_τ = u3_x: ∂_τ(u2 u1_x) = 0 (u1, u2 do not move under τ); ∂_t u3_x = 0
    np.testing.assert_allclose(flows.oracle_flow_commutator(X, Y, c, s), 0.0, atol=1e-15)
    Y2 = ExprTensor.from_strings(["0", "1", "0"], ("u1", "u2", "u3")).jet((0.5, 0.6, 0.7), 1)
    # u2_τ = u2_x: ∂_τ(u2 u1_x) = u2_τ u1_x + 0 = u2_x u1_x = 2 (component 1)
    np.testing.assert_allclose(flows.oracle_flow_commutator(X, Y2, c, s), [2.0, 0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(flows.flow_rhs(V_jet(c, X).value, s), [0.6 * 1.0, 0.0, 0.0])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000), st.booleans())
def test_criterion_agrees_with_oracle(seed, decoupled):
    rng = np.random.default_rng(seed)
    x = CANONICAL.sample(rng, 1)[0]
    c = CANONICAL.c(x, 1)
    make = flows.decoupled_field if decoupled else flows.random_polynomial_field
    X, Y = make(rng, 3, 2).jet(x, 1), make(rng, 3, 2).jet(x, 1)
    criterion = flows.iff_commutativity_residual(X, Y, c).passes(1e-8, 1e-8)
    oracle = all(flows.oracle_residual(X, Y, c, JetState.random(rng, x)).passes(1e-8, 1e-8)
                 for _ in range(6))
    assert criterion == oracle
    if flows.sufficient_condition_residual(X, Y, c).passes(1e-8, 1e-8):
        assert criterion


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 100_000))
def test_bracket_identity_and_sufficient_forms(seed):
    rng = np.random.default_rng(seed)
    x = DKDV.sample(rng, 1)[0]
    c = DKDV.c(x, 1)
    X, Y, Z = (flows.random_polynomial_field(rng, 2, 2).jet(x, 1) for _ in range(3))
    lhs, rhs = flows.commdot_bracket(X, Y, Z, c), flows.qic_expression(X, Y, Z, c)
    np.testing.assert_allclose(lhs, rhs, atol=1e-11 * (1 + np.max(np.abs(lhs))))
    res = flows.sufficient_condition_residual(X, Y, c)
    assert res.agreement < 1e-11 * (1 + res.cc2.scale)


def test_single_z_criterion_is_polarized_criterion():
    rng = np.random.default_rng(4)
    x = DKDV.sample(rng, 1)[0]
    c = DKDV.c(x, 1)
    X, Y = (flows.random_polynomial_field(rng, 2, 2).jet(x, 1) for _ in range(2))
    Z = rng.uniform(-1, 1, 2)
    single = flows.single_z_residual(X, Y, c, Z)
    polar = flows.iff_commutativity_residual(X, Y, c, Z)
    # the polarized form at Z = W is twice the single-vector form
    assert abs(2 * single.value - polar.value) < 1e-12 * (1 + polar.value)


def test_polynomial_fields():
    f = PolynomialField(np.array([[1.0, 2.0, 0.0], [0.0, 0.0, 1.0]]), (0.0, 0.0), 1)
    np.testing.assert_allclose(f((1.0, 2.0)), [3.0, 2.0])
    assert f.coefficient(0, (1, 0)) == 2.0
    g = (f + f.scaled(2.0))
    np.testing.assert_allclose(g((1.0, 2.0)), [9.0, 6.0])
    with pytest.raises(ValueError):
        PolynomialField(np.zeros((2, 4)), (0.0, 0.0), 1)
    with pytest.raises(ValueError):
        f + PolynomialField(np.zeros((2, 3)), (1.0, 0.0), 1)
    with pytest.raises(ValueError):
        JetState(np.zeros(2), np.zeros(3), np.zeros(2))
