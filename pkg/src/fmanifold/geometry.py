"""Pointwise tensor calculus: connections, curvature, covariant and Lie derivatives.

Index conventions (all arrays, derivative index always appended last):

* ``c[i, j, k] = c^i_{jk}``; ``gamma[i, j, k] = Γ^i_{jk}`` with
  ``∇_j X^i = ∂_j X^i + Γ^i_{jk} X^k``.
* ``R[i, l, m, j] = ∂_m Γ^i_{jl} − ∂_j Γ^i_{ml} + Γ^i_{mk} Γ^k_{jl} − Γ^i_{jk} Γ^k_{ml}``,
  i.e. the ``∂_i`` component of ``R(∂_m, ∂_j) ∂_l``.
"""

from __future__ import annotations

import numpy as np

from .errors import EvaluationError
from .fields import Residual, TensorJet
from .jets import JetSpace


def christoffel_from_metric(g: TensorJet) -> TensorJet:
    """Levi-Civita symbols as a jet of order ``g.order - 1``."""
    if g.order < 1:
        raise ValueError("metric jet of order >= 1 required")
    space = g.space
    n = space.dim
    if np.max(np.abs(g.value - g.value.T)) > 1e-12 * max(1.0, np.max(np.abs(g.value))):
        raise EvaluationError("metric is not symmetric")
    low = JetSpace.get(n, g.order - 1)
    g_low = g.coeffs[..., : low.size]
    try:
        ginv = low.inverse_matrix(g_low)
    except EvaluationError as exc:
        raise EvaluationError("singular metric") from exc
    # dg[l, k, j] = ∂_j g_{lk}
    dg = np.stack([space.diff(g.coeffs, j)[1] for j in range(n)], axis=2)
    # first kind: Γ_{l jk} = ½(∂_j g_{lk} + ∂_k g_{lj} − ∂_l g_{jk})
    first = 0.5 * (dg.transpose(0, 2, 1, 3) + dg - dg.transpose(2, 1, 0, 3))
    # first[l, j, k] = ½(dg[l,k,j] + dg[l,j,k] − dg[j,k,l])
    prod = low.mul(ginv[:, :, None, None, :], first[None, :, :, :, :])
    return TensorJet(low, prod.sum(axis=1))


def inverse_metric(g_value: np.ndarray) -> np.ndarray:
    try:
        inv = np.linalg.inv(g_value)
    except np.linalg.LinAlgError as exc:
        raise EvaluationError("singular metric") from exc
    if not np.all(np.isfinite(inv)):
        raise EvaluationError("singular metric")
    return inv


def _curvature_terms(gamma_value: np.ndarray, gamma_d1: np.ndarray):
    t1 = np.einsum("ijlm->ilmj", gamma_d1)
    t2 = np.einsum("imlj->ilmj", gamma_d1)
    t3 = np.einsum("imk,kjl->ilmj", gamma_value, gamma_value)
    t4 = np.einsum("ijk,kml->ilmj", gamma_value, gamma_value)
    return t1, t2, t3, t4


def riemann_curvature(gamma: TensorJet) -> np.ndarray:
    """Curvature array ``R[i, l, m, j]`` (needs a jet of order >= 1)."""
    t1, t2, t3, t4 = _curvature_terms(gamma.value, gamma.d1)
    return t1 - t2 + t3 - t4


def curvature_scale(gamma: TensorJet) -> float:
    terms = _curvature_terms(gamma.value, gamma.d1)
    return max(float(np.max(np.abs(t))) for t in terms)


def curvature_antisymmetry_residual(R: np.ndarray) -> Residual:
    return Residual.of(R + R.transpose(0, 1, 3, 2), R)


def deformed_curvature(gamma: TensorJet, c: TensorJet, z: float) -> np.ndarray:
    """Curvature of ``Γ + z c``."""
    return riemann_curvature(gamma + c.scaled(z))


def torsion(gamma_value: np.ndarray) -> np.ndarray:
    return gamma_value - gamma_value.transpose(0, 2, 1)


def covariant_derivative(T: TensorJet, gamma_value: np.ndarray, valence: tuple[int, int]) -> np.ndarray:
    """``∇T`` at the base point with the derivative index appended last."""
    d = T.d1
    t = T.value
    G = gamma_value
    if valence == (1, 0):
        return d + np.einsum("ijk,k->ij", G, t)
    if valence == (1, 1):
        return d + np.einsum("imk,kj->ijm", G, t) - np.einsum("kmj,ik->ijm", G, t)
    if valence == (1, 2):
        return (d + np.einsum("iml,ljk->ijkm", G, t)
                - np.einsum("lmj,ilk->ijkm", G, t)
                - np.einsum("lmk,ijl->ijkm", G, t))
    if valence == (0, 2):
        return d - np.einsum("lmi,lj->ijm", G, t) - np.einsum("lmj,il->ijm", G, t)
    raise ValueError(f"unsupported valence {valence}")


def metricity_residual(g: TensorJet, gamma_value: np.ndarray) -> Residual:
    Dg = covariant_derivative(g, gamma_value, (0, 2))
    return Residual.of(Dg, g.d1, np.einsum("lmi,lj->ijm", gamma_value, g.value))


def lie_bracket(X: TensorJet, Y: TensorJet) -> np.ndarray:
    """``[X, Y]^i = X^m ∂_m Y^i − Y^m ∂_m X^i`` at the base point."""
    return np.einsum("m,im->i", X.value, Y.d1) - np.einsum("m,im->i", Y.value, X.d1)


def lie_derivative_c(X: TensorJet, c: TensorJet) -> np.ndarray:
    """``(Lie_X c)^i_{jk}`` at the base point."""
    dX = X.d1  # dX[i, m] = ∂_m X^i
    return (np.einsum("m,ijkm->ijk", X.value, c.d1)
            - np.einsum("mjk,im->ijk", c.value, dX)
            + np.einsum("imk,mj->ijk", c.value, dX)
            + np.einsum("ijm,mk->ijk", c.value, dX))


def lie_derivative_11(X: TensorJet, V: TensorJet) -> np.ndarray:
    """``(Lie_X V)^i_j`` for a (1,1) tensor."""
    dX = X.d1
    return (np.einsum("m,ijm->ij", X.value, V.d1)
            - np.einsum("mj,im->ij", V.value, dX)
            + np.einsum("im,mj->ij", V.value, dX))


def scc_residual(c: TensorJet, gamma_value: np.ndarray) -> Residual:
    """Symmetry ``∇_l c^i_{jk} = ∇_j c^i_{lk}`` of the covariant derivative of ``c``."""
    D = covariant_derivative(c, gamma_value, (1, 2))  # D[i, j, k, l] = ∇_l c^i_{jk}
    return Residual.of(D - D.transpose(0, 3, 2, 1), c.d1,
                       np.einsum("iml,ljk->ijkm", gamma_value, c.value))
