"""Hydrodynamic flows ``u_t = V_X(u) u_x`` and their commutativity."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .algebra import V_jet, bracket, circ, product
from .fields import Residual, TensorField, TensorJet
from .geometry import lie_derivative_c, lie_derivative_11
from .jets import JetSpace


# -- polynomial vector fields -------------------------------------------------

class PolynomialField(TensorField):
    """Polynomial tensor field ``Σ_a coeffs[..., a] (x − base)^a`` (graded-lex monomials)."""

    def __init__(self, coeffs: np.ndarray, base: Sequence[float], degree: int):
        self.space = JetSpace.get(len(base), degree)
        self.coeffs = np.asarray(coeffs, dtype=float)
        if self.coeffs.shape[-1] != self.space.size:
            raise ValueError("coefficient length does not match the monomial basis")
        self.base = tuple(float(b) for b in base)
        self.degree = degree
        self.shape = self.coeffs.shape[:-1]

    def jet(self, x0, order):
        target = JetSpace.get(self.space.dim, order)
        inner = [target.variable(i, x0) for i in range(self.space.dim)]
        return TensorJet(target, self.space.compose(self.coeffs, inner, self.base, target))

    def __call__(self, x) -> np.ndarray:
        return self.jet(x, 0).value

    def coefficient(self, component, monomial: Sequence[int]) -> float:
        return float(self.coeffs[component][self.space.position[tuple(monomial)]])

    def __add__(self, other: "PolynomialField") -> "PolynomialField":
        if self.base != other.base:
            raise ValueError("fields expanded about different points")
        deg = max(self.degree, other.degree)
        sp = JetSpace.get(len(self.base), deg)
        a = self.space.embed(self.coeffs, sp)
        b = other.space.embed(other.coeffs, sp)
        return PolynomialField(a + b, self.base, deg)

    def scaled(self, s: float) -> "PolynomialField":
        return PolynomialField(s * self.coeffs, self.base, self.degree)


def random_polynomial_field(rng: np.random.Generator, n: int, degree: int,
                            shape: tuple[int, ...] | None = None) -> PolynomialField:
    """Vector field with monomial coefficients drawn uniformly from [−1, 1]."""
    sp = JetSpace.get(n, degree)
    shape = (n,) if shape is None else shape
    return PolynomialField(rng.uniform(-1.0, 1.0, shape + (sp.size,)), [0.0] * n, degree)


def decoupled_field(rng: np.random.Generator, n: int, degree: int) -> PolynomialField:
    """Random ``X^i = v^i(x^i)``: a polynomial of the i-th coordinate only."""
    sp = JetSpace.get(n, degree)
    coeffs = np.zeros((n, sp.size))
    for i in range(n):
        for d in range(degree + 1):
            a = [0] * n
            a[i] = d
            coeffs[i, sp.position[tuple(a)]] = rng.uniform(-1.0, 1.0)
    return PolynomialField(coeffs, [0.0] * n, degree)


# -- flows --------------------------------------------------------------------

@dataclass(frozen=True)
class JetState:
    """Second-order jet ``(u, u_x, u_xx)`` of a field ``u(x)`` at one ``x``."""

    u0: np.ndarray
    ux: np.ndarray
    uxx: np.ndarray

    def __post_init__(self):
        n = len(self.u0)
        if len(self.ux) != n or len(self.uxx) != n:
            raise ValueError("JetState components must have the chart dimension")

    @staticmethod
    def random(rng: np.random.Generator, u0) -> "JetState":
        n = len(u0)
        return JetState(np.asarray(u0, float), rng.uniform(-1, 1, n), rng.uniform(-1, 1, n))


@dataclass(frozen=True)
class HydroFlow:
    X: TensorField
    c: TensorField

    def V(self, x0, order: int = 1) -> TensorJet:
        return V_jet(self.c.jet(x0, order), self.X.jet(x0, order))


def flow_rhs(V: np.ndarray, s: JetState) -> np.ndarray:
    """``u_t = V_X(u) u_x``."""
    return V @ s.ux


def _P_terms(X: TensorJet, Y: TensorJet, c: TensorJet):
    """Summands of ``P^i_j = (Lie_X c)^i_{jq}Y^q − (Lie_Y c)^i_{jq}X^q + c^i_{jq}[X,Y]^q``."""
    out = []
    for A, B, sgn in ((X, Y, 1.0), (Y, X, -1.0)):
        dA = A.d1
        out += [
            sgn * np.einsum("m,ijqm,q->ij", A.value, c.d1, B.value),
            -sgn * np.einsum("mjq,im,q->ij", c.value, dA, B.value),
            sgn * np.einsum("imq,mj,q->ij", c.value, dA, B.value),
            sgn * np.einsum("ijm,mq,q->ij", c.value, dA, B.value),
        ]
    for A, B, sgn in ((X, Y, 1.0), (Y, X, -1.0)):
        out.append(sgn * np.einsum("ijq,m,qm->ij", c.value, A.value, B.d1))
    return out


def sufficient_condition_array(X: TensorJet, Y: TensorJet, c: TensorJet) -> np.ndarray:
    """``P[i, p] = (Lie_X c)^i_{pq}Y^q − (Lie_Y c)^i_{pq}X^q + c^i_{pq}[X,Y]^q``."""
    return (np.einsum("ipq,q->ip", lie_derivative_c(X, c), Y.value)
            - np.einsum("ipq,q->ip", lie_derivative_c(Y, c), X.value)
            + np.einsum("ipq,q->ip", c.value, bracket(X, Y)))


def cc3_array(X: TensorJet, Y: TensorJet, c: TensorJet) -> np.ndarray:
    """``Lie_X V_Y − Lie_Y V_X − V_{[X,Y]}``."""
    VX, VY = V_jet(c, X), V_jet(c, Y)
    return (lie_derivative_11(X, VY) - lie_derivative_11(Y, VX)
            - np.einsum("ijk,k->ij", c.value, bracket(X, Y)))


@dataclass(frozen=True)
class SufficientResult:
    cc2: Residual
    cc3: Residual
    agreement: float

    def passes(self, tol_abs=1e-9, tol_rel=1e-9) -> bool:
        return self.cc2.passes(tol_abs, tol_rel)


def sufficient_condition_residual(X: TensorJet, Y: TensorJet, c: TensorJet) -> SufficientResult:
    terms = _P_terms(X, Y, c)
    P = sufficient_condition_array(X, Y, c)
    Q = cc3_array(X, Y, c)
    return SufficientResult(Residual.of(P, *terms), Residual.of(Q, *terms),
                            float(np.max(np.abs(P - Q))))


def _polarize(c: np.ndarray, P: np.ndarray) -> np.ndarray:
    """``c^r_{is} P^i_j + c^r_{ij} P^i_s`` indexed ``[r, j, s]``."""
    return np.einsum("ris,ij->rjs", c, P) + np.einsum("rij,is->rjs", c, P)


def iff_commutativity_residual(X: TensorJet, Y: TensorJet, c: TensorJet,
                               Z=None, W=None) -> Residual:
    """Polarized commutativity criterion; all basis pairs when ``Z, W`` are omitted."""
    terms = [_polarize(c.value, t) for t in _P_terms(X, Y, c)]
    Q = _polarize(c.value, sufficient_condition_array(X, Y, c))
    if Z is not None:
        W = Z if W is None else W
        Q = np.einsum("rjs,j,s->r", Q, Z, W)
        terms = [np.einsum("rjs,j,s->r", t, Z, W) for t in terms]
    return Residual.of(Q, *terms)


def single_z_residual(X: TensorJet, Y: TensorJet, c: TensorJet, Z) -> Residual:
    """``((Lie_X c)(Y,Z) − (Lie_Y c)(X,Z) + [X,Y]∘Z)∘Z``."""
    P = sufficient_condition_array(X, Y, c) @ Z
    terms = [t @ Z for t in _P_terms(X, Y, c)]
    return Residual.of(product(P, Z, c.value),
                       *[product(t, Z, c.value) for t in terms])


def _commutator_terms(VX: TensorJet, VY: TensorJet, s: JetState):
    ux, uxx = s.ux, s.uxx
    ut, utau = VX.value @ ux, VY.value @ ux
    a = VX.value @ VY.value @ uxx
    b = np.einsum("ijm,m,j->i", VX.d1, utau, ux)
    cc = VX.value @ np.einsum("ijm,m,j->i", VY.d1, ux, ux)
    a2 = VY.value @ VX.value @ uxx
    b2 = np.einsum("ijm,m,j->i", VY.d1, ut, ux)
    c2 = VY.value @ np.einsum("ijm,m,j->i", VX.d1, ux, ux)
    return (a, b, cc), (a2, b2, c2)


def oracle_flow_commutator(X: TensorJet, Y: TensorJet, c: TensorJet, s: JetState) -> np.ndarray:
    """``∂_τ(V_X u_x) − ∂_t(V_Y u_x)`` by the chain rule on the jet ``s``."""
    (a, b, cc), (a2, b2, c2) = _commutator_terms(V_jet(c, X), V_jet(c, Y), s)
    return (a + b + cc) - (a2 + b2 + c2)


def oracle_residual(X: TensorJet, Y: TensorJet, c: TensorJet, s: JetState) -> Residual:
    first, second = _commutator_terms(V_jet(c, X), V_jet(c, Y), s)
    return Residual.of(sum(first) - sum(second), *first, *second)


def commdot_bracket(X: TensorJet, Y: TensorJet, Z: TensorJet, c: TensorJet) -> np.ndarray:
    """``[Z∘X, Y] + [X, Z∘Y] − [X, Z]∘Y − [X, Y]∘Z − X∘[Z, Y]``."""
    cv = c.value
    return (bracket(circ(c, Z, X), Y) + bracket(X, circ(c, Z, Y))
            - product(bracket(X, Z), Y.value, cv) - product(bracket(X, Y), Z.value, cv)
            - product(X.value, bracket(Z, Y), cv))


def qic_expression(X: TensorJet, Y: TensorJet, Z: TensorJet, c: TensorJet) -> np.ndarray:
    """``(Lie_X c)(Y, Z) − (Lie_Y c)(X, Z) + [X, Y]∘Z``."""
    return (np.einsum("ijk,j,k->i", lie_derivative_c(X, c), Y.value, Z.value)
            - np.einsum("ijk,j,k->i", lie_derivative_c(Y, c), X.value, Z.value)
            + product(bracket(X, Y), Z.value, c.value))
