"""Non-flat compatible connections and Riemannian F-manifolds.

Curvature arrays follow :mod:`fmanifold.geometry`: ``R[k, l, m, i]`` is the
``∂_k`` component of ``R(∂_m, ∂_i) ∂_l``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConstructionError, EvaluationError
from .fields import Residual, TensorJet
from .flows import PolynomialField
from .geometry import covariant_derivative, inverse_metric
from .jets import Jet, JetSpace


def _distinct(n: int, r: int):
    return [t for t in itertools.permutations(range(n), r)]


# -- admissible vector fields and curvature obstructions ----------------------

def admissible_residual(X: TensorJet, c: np.ndarray, gamma_value: np.ndarray) -> Residual:
    """``c^i_{jm} ∇_k X^m − c^i_{km} ∇_j X^m``, indexed ``[i, j, k]``."""
    D = covariant_derivative(X, gamma_value, (1, 0))  # D[m, k] = ∇_k X^m
    left = np.einsum("ijm,mk->ijk", c, D)
    return Residual.of(left - left.transpose(0, 2, 1), left,
                       np.einsum("ijm,mk->ijk", c, X.d1))


def _shc_terms(c: np.ndarray, R: np.ndarray):
    return (np.einsum("klmi,npk->npmil", R, c),
            np.einsum("klip,nmk->npmil", R, c),
            np.einsum("klpm,nik->npmil", R, c))


def curvature_obstruction_residual(c: np.ndarray, R: np.ndarray) -> Residual:
    """``R^k_{lmi}c^n_{pk} + R^k_{lip}c^n_{mk} + R^k_{lpm}c^n_{ik}``."""
    t = _shc_terms(c, R)
    return Residual.of(sum(t), *t)


def vectorwise_obstruction_residual(X: np.ndarray, c: np.ndarray, R: np.ndarray) -> Residual:
    """``Z∘R(W,Y)X + W∘R(Y,Z)X + Y∘R(Z,W)X`` on all basis triples ``(Y, W, Z)``."""
    RX = np.einsum("klab,l->kab", R, X)  # R(∂_a, ∂_b) X
    t = (np.einsum("nzk,kwy->nywz", c, RX),
         np.einsum("nwk,kyz->nywz", c, RX),
         np.einsum("nyk,kzw->nywz", c, RX))
    return Residual.of(sum(t), *t)


def bianchi_form_residual(c: np.ndarray, R: np.ndarray) -> Residual:
    """``R(Y,Z)(X∘W) + R(X,Y)(Z∘W) + R(Z,X)(Y∘W)`` on all basis quadruples."""
    t = (np.einsum("ilyz,lxw->ixyzw", R, c),
         np.einsum("ilxy,lzw->ixyzw", R, c),
         np.einsum("ilzx,lyw->ixyzw", R, c))
    return Residual.of(sum(t), *t)


def special_curvature_components(R: np.ndarray) -> Residual:
    """Components ``R^n_{nmi}`` and ``R^n_{mmi}`` with ``n, m, i`` distinct."""
    n = R.shape[0]
    vals = [R[a, a, b, d] for a, b, d in _distinct(n, 3)] + [R[a, b, b, d] for a, b, d in _distinct(n, 3)]
    return Residual.of(np.array(vals), R)


# -- canonical coordinates ----------------------------------------------------

@dataclass(frozen=True)
class ResidualPair:
    first: Residual
    second: Residual

    def passes(self, tol_abs=1e-9, tol_rel=1e-9) -> bool:
        return self.first.passes(tol_abs, tol_rel) and self.second.passes(tol_abs, tol_rel)


def canonical_connection_identities(gamma_value: np.ndarray) -> ResidualPair:
    """``Γ^i_{kk} + Γ^i_{ki}`` (i ≠ k) and ``Γ^i_{kl}`` (i, k, l distinct)."""
    G = gamma_value
    n = G.shape[0]
    e1 = np.array([G[i, k, k] + G[i, k, i] for i, k in _distinct(n, 2)])
    e2 = np.array([G[i, k, l] for i, k, l in _distinct(n, 3)])
    return ResidualPair(Residual.of(e1, G), Residual.of(e2, G))


def tsarev_system_coefficients(gamma_value: np.ndarray, tol_abs=1e-9, tol_rel=1e-9) -> np.ndarray:
    """Table ``a[i, k] = Γ^i_{ki}`` (zero diagonal) of ``∂_k v^i = a[i, k](v^k − v^i)``."""
    ids = canonical_connection_identities(gamma_value)
    if not ids.passes(tol_abs, tol_rel):
        raise EvaluationError(
            "connection does not satisfy the canonical-chart identities "
            f"(residuals {ids.first.value:.3e}, {ids.second.value:.3e})")
    n = gamma_value.shape[0]
    a = np.zeros((n, n))
    for i, k in _distinct(n, 2):
        a[i, k] = gamma_value[i, k, i]
    return a


def tsarev_compatibility_residual(gamma: TensorJet) -> ResidualPair:
    """Compatibility of the Tsarev system over pairwise distinct ``(k, i, m)``."""
    G, dG = gamma.value, gamma.d1  # dG[a, b, c, d] = ∂_d Γ^a_{bc}
    n = G.shape[0]
    r1, s1, r2, s2 = [], [], [], []
    for k, i, m in _distinct(n, 3):
        t = (dG[k, m, k, i], -dG[k, i, k, m])
        r1.append(sum(t))
        s1.extend(t)
        t = (dG[k, k, m, i], -G[k, k, m] * G[m, i, m], G[k, i, k] * G[k, k, m],
             -G[k, i, k] * G[i, i, m])
        r2.append(sum(t))
        s2.extend(t)
    return ResidualPair(Residual.of(np.array(r1), np.array(s1)),
                        Residual.of(np.array(r2), np.array(s2)))


# -- Tsarev solutions ---------------------------------------------------------

@dataclass
class DiagonalSolution:
    """Characteristic velocities ``v^i`` as a series in the canonical chart."""

    v: PolynomialField
    consistency: float = 0.0

    def jet(self, x0, order: int) -> TensorJet:
        return self.v.jet(x0, order)

    def __call__(self, x) -> np.ndarray:
        return self.v(x)


def tsarev_solve(gamma: TensorJet, boundary: Sequence[Sequence[float]], x0: Sequence[float],
                 K: int = 8, tol: float = 1e-9) -> DiagonalSolution:
    """Series solution of ``∂_k v^i = Γ^i_{ki}(v^k − v^i)`` about ``x0``.

    ``boundary[i]`` lists the coefficients (ascending powers of ``r^i − x0^i``)
    of ``v^i`` restricted to the i-th coordinate line through ``x0``.
    """
    n = gamma.space.dim
    sp = JetSpace.get(n, K)
    if gamma.order < K - 1:
        raise ValueError(f"connection jet of order >= {K - 1} required")
    a = np.zeros((n, n, sp.size))
    for i, k in _distinct(n, 2):
        a[i, k] = gamma.space.embed(gamma.coeffs[i, k, i], sp) if gamma.order < K \
            else gamma.coeffs[i, k, i][: sp.size]
    v = np.zeros((n, sp.size))
    for i in range(n):
        for d, coef in enumerate(boundary[i][: K + 1]):
            e = [0] * n
            e[i] = d
            v[i, sp.position[tuple(e)]] = coef
    worst = 0.0
    for d in range(1, K + 1):
        diff = v[None, :, :] - v[:, None, :]          # diff[i, k] = v^k − v^i
        rhs = sp.mul(a, diff)                          # rhs[i, k] = a_ik (v^k − v^i)
        for idx, alpha in enumerate(sp.indices):
            if sum(alpha) != d:
                continue
            for i in range(n):
                ks = [k for k in range(n) if k != i and alpha[k] > 0]
                if not ks:
                    continue
                vals = []
                for k in ks:
                    lower = list(alpha)
                    lower[k] -= 1
                    vals.append(rhs[i, k, sp.position[tuple(lower)]] / alpha[k])
                scale = max(1.0, max(abs(x) for x in vals))
                spread = (max(vals) - min(vals)) / scale
                worst = max(worst, spread)
                if spread > tol:
                    raise ConstructionError(
                        f"Tsarev system inconsistent at degree {d} (spread {spread:.3e})",
                        degree=d, residual=spread)
                v[i, idx] = vals[0]
    return DiagonalSolution(PolynomialField(v, x0, K), worst)


def velocity_gap(v: np.ndarray) -> float:
    gaps = np.abs(v[:, None] - v[None, :])
    gaps[np.diag_indices_from(gaps)] = np.inf
    return float(np.min(gaps)) if v.size > 1 else float("inf")


def semi_hamiltonian_residual(v: TensorJet, min_gap: float = 1e-6) -> Residual:
    """``∂_k(∂_j v^i/(v^j − v^i)) − ∂_j(∂_k v^i/(v^k − v^i))`` over distinct ``(i, j, k)``."""
    if v.order < 2:
        raise ValueError("second-order jets of the velocities are required")
    gap = velocity_gap(v.value)
    if gap < min_gap:
        raise EvaluationError(f"coinciding characteristic velocities (gap {gap:.3e})")
    sp = v.space
    n = sp.dim
    comps = [Jet(sp, v.coeffs[i]) for i in range(n)]
    q = {}
    for i, j in _distinct(n, 2):
        q[i, j] = comps[i].diff(j) / (comps[j] - comps[i]).truncate(sp.order - 1)
    res, terms = [], []
    for i, j, k in _distinct(n, 3):
        a = q[i, j].diff(k).value
        b = q[i, k].diff(j).value
        res.append(a - b)
        terms.extend([a, b])
    return Residual.of(np.array(res), np.array(terms))


def chsym_residual(v: TensorJet, gamma_value: np.ndarray) -> Residual:
    """``∂_k v^i − Γ^i_{ki}(v^k − v^i)`` for ``i ≠ k``."""
    n = gamma_value.shape[0]
    dv = v.d1
    res, terms = [], []
    for i, k in _distinct(n, 2):
        rhs = gamma_value[i, k, i] * (v.value[k] - v.value[i])
        res.append(dv[i, k] - rhs)
        terms.extend([dv[i, k], rhs])
    return Residual.of(np.array(res), np.array(terms))


# -- Riemannian structure -----------------------------------------------------

def invariance_residual(g: np.ndarray, c: np.ndarray) -> ResidualPair:
    """Covariant ``g_{iq}c^q_{lp} − g_{lq}c^q_{ip}`` and contravariant forms."""
    cov = np.einsum("iq,qlp->ilp", g, c)
    ginv = inverse_metric(g)
    con = np.einsum("iq,lqp->ilp", ginv, c)
    return ResidualPair(Residual.of(cov - cov.transpose(1, 0, 2), cov),
                        Residual.of(con - con.transpose(1, 0, 2), con))


def egorov_check(g: TensorJet) -> ResidualPair:
    """Diagonality, and the potentiality closure ``∂_j g_ii = ∂_i g_jj``."""
    gv, dg = g.value, g.d1
    n = gv.shape[0]
    off = gv - np.diag(np.diag(gv))
    clos = np.array([dg[i, i, j] - dg[j, j, i] for i, j in _distinct(n, 2)])
    return ResidualPair(Residual.of(off, gv), Residual.of(clos, dg))


@dataclass(frozen=True)
class QuadraticExpansion:
    fields: tuple          # vectors X_(α) at the point
    signs: tuple           # ε_α

    def gram(self, n: int) -> np.ndarray:
        G = np.zeros((n, n))
        for X, e in zip(self.fields, self.signs):
            X = np.asarray(X, dtype=float)
            G += e * np.outer(X, X)
        return G


def raised_curvature(R: np.ndarray, g: np.ndarray, pairing: str = "first") -> np.ndarray:
    """``R^{sk}_{mi}``: ``g^{sl}R^k_{lmi}`` (``first``) or ``g^{kl}R^s_{lmi}`` (``second``)."""
    ginv = inverse_metric(g)
    if pairing == "first":
        return np.einsum("sl,klmi->skmi", ginv, R)
    if pairing == "second":
        return np.einsum("kl,slmi->skmi", ginv, R)
    raise ValueError(f"unknown pairing {pairing!r}")


def expansion_curvature(c: np.ndarray, G: np.ndarray) -> np.ndarray:
    """``(c^s_{ml}c^k_{iq} − c^s_{il}c^k_{mq}) G^{lq}`` indexed ``[s, k, m, i]``."""
    return (np.einsum("sml,kiq,lq->skmi", c, c, G) - np.einsum("sil,kmq,lq->skmi", c, c, G))


def quadratic_expansion_check(Q: QuadraticExpansion, g: np.ndarray, c: np.ndarray,
                              R: np.ndarray, pairing: str = "first") -> ResidualPair:
    """(a) geometric vs. expanded raised curvature; (b) the cyclic sum of the expansion."""
    n = c.shape[0]
    G = Q.gram(n)
    geo = raised_curvature(R, g, pairing)
    exp = expansion_curvature(c, G)
    a = Residual.of(geo - exp, geo, np.einsum("sml,kiq,lq->skmi", c, c, G))
    t = (np.einsum("skmi,npk->snpmi", exp, c),
         np.einsum("skip,nmk->snpmi", exp, c),
         np.einsum("skpm,nik->snpmi", exp, c))
    b = Residual.of(sum(t), *t)
    return ResidualPair(a, b)
