import numpy as np
import pytest

from fmanifold import hierarchy
from fmanifold.errors import ConstructionError
from fmanifold.fields import ExprTensor
from fmanifold.manifold import ManifoldSpec
from fmanifold.specio import load_fixture

DKDV = load_fixture("dkdv-frobenius").manifold


@pytest.fixture(scope="module")
def h():
    return hierarchy.build_hierarchy(DKDV, alpha_max=2, K=8)


def terms(field):
    return {(t["component"], tuple(t["monomial"])): t["coefficient"] for t in field.to_dict()["terms"]}


def test_hierarchy_size_and_labels(h):
    assert h.labels() == [(1, 0), (1, 1), (1, 2), (2, 0), (2, 1), (2, 2)]
    assert h.base == (0.0, 0.0)


def test_series_coefficients_in_flat_coordinates(h):
    assert terms(h.fields[(1, 0)]) == {(1, (0, 0)): 1.0}
    assert terms(h.fields[(2, 0)]) == {(2, (0, 0)): 1.0}
    assert terms(h.fields[(1, 1)]) == {(1, (1, 0)): 1.0, (2, (0, 1)): 1.0}   # X_(1,1) = (u1, u2)
    # ∂_j X^i = c^i_{j2}: X_(2,1) = (u2²/2, u1)
    assert terms(h.fields[(2, 1)]) == {(1, (0, 2)): 0.5, (2, (1, 0)): 1.0}


def test_recursion_and_deformed_flatness(h):
    rng = np.random.default_rng(0)
    for x in rng.uniform(-0.5, 0.5, (6, 2)):
        c = DKDV.c(x, 1)
        G = DKDV.gamma(x, 0)
        for (p, a), X in h.fields.items():
            prev = h.fields[(p, a - 1)].jet(x, 0) if a else None
            assert hierarchy.recursion_residual(X.jet(x, 1), prev, c, G.value).passes(1e-12, 1e-12)
        for p in (1, 2):
            members = [h.fields[(p, a)].jet(x, 1) for a in range(3)]
            for z in (0.0, 1.0, -2.0):
                assert hierarchy.deformed_flatness_residual(members, c, G, z).passes(1e-12, 1e-12)


def test_all_pairs_commute(h):
    pairs = hierarchy.pairwise_cc2(h, DKDV, np.random.default_rng(1).uniform(-0.5, 0.5, (4, 2)))
    assert len(pairs) == 15
    assert all(r.passes(1e-8, 1e-8) for r in pairs.values())


def test_flat_basis_only_and_restricted_p():
    h0 = hierarchy.build_hierarchy(DKDV, alpha_max=0, K=4)
    assert h0.labels() == [(1, 0), (2, 0)]
    h1 = hierarchy.build_hierarchy(DKDV, p_max=1, alpha_max=1, K=4)
    assert h1.labels() == [(1, 0), (1, 1)]


def test_integration_constants():
    h = hierarchy.build_hierarchy(DKDV, alpha_max=1, K=4, const_terms={(1, 1): [2.0, -1.0]})
    np.testing.assert_allclose(h.fields[(1, 1)].constant_term, [2.0, -1.0])


def test_compatibility_residual_of_frobenius_structure():
    x = (0.3, 1.1)
    r = hierarchy.compatibility_residual(DKDV.c(x, 1), DKDV.gamma(x, 1))
    assert r.combined().passes()


def test_curved_connection_is_refused():
    sphere = ManifoldSpec(
        name="sphere", coords=("th", "ph"), box=[[0.5, 1.0], [0.0, 1.0]],
        structure=ExprTensor.from_strings([[["1", None], [None, None]], [[None, None], [None, "1"]]],
                                          ("th", "ph")),
        metric=ExprTensor.from_strings([["1", None], [None, "sin(th)^2"]], ("th", "ph")))
    with pytest.raises(ConstructionError, match="not flat"):
        hierarchy.build_hierarchy(sphere, K=4)


def test_inconsistent_recursion_reports_degree():
    """A flat connection with a product that is not compatible with it."""
    bad = ManifoldSpec(
        name="bad", coords=("u1", "u2"), box=[[0.1, 0.5], [0.1, 0.5]],
        structure=ExprTensor.from_strings([[["1", None], [None, "exp(u1)"]], [[None, "1"], ["1", None]]],
                                          ("u1", "u2")),
        metric=ExprTensor.from_strings([[None, "1"], ["1", None]], ("u1", "u2")), base_point=(0.2, 0.2))
    with pytest.raises(ConstructionError) as info:
        hierarchy.build_hierarchy(bad, alpha_max=2, K=6)
    assert info.value.degree is not None and info.value.degree >= 1


def test_export_round_trips_numbers(h):
    d = h.to_dict()
    assert d["order"] == 8 and len(d["fields"]) == 6
    assert all(f["consistency_residual"] <= 1e-10 for f in d["fields"])
