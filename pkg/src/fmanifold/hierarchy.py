"""Principal hierarchy of a flat compatible structure, as truncated power series.

Each level solves ``∂_j X^i = −Γ^i_{jk} X^k + c^i_{jk} X_prev^k`` degree by degree
about a base point.  The degree-``d`` part of ``X`` is the homotopy potential
``(1/d) Σ_j y^j R^i_j`` of the degree-``(d−1)`` part ``R`` of the right-hand side
(``y = x − x0``); the failure of ``R`` to be closed is measured and reported as
the consistency residual of that degree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConstructionError
from .fields import Residual, TensorJet
from .flows import PolynomialField, sufficient_condition_residual
from .geometry import covariant_derivative, riemann_curvature, curvature_scale
from .jets import JetSpace
from .manifold import ManifoldSpec

TAIL_TARGET = 1e-10


class SeriesVectorField(PolynomialField):
    """Vector field stored as a truncated Taylor series about ``base``."""

    def __init__(self, coeffs, base, degree, label=None, consistency: float = 0.0):
        super().__init__(coeffs, base, degree)
        self.label = label
        self.consistency = consistency

    @property
    def constant_term(self) -> np.ndarray:
        return self.coeffs[..., 0].copy()

    def degree_norm(self, d: int) -> float:
        mask = self.space.degrees == d
        return float(np.max(np.abs(self.coeffs[..., mask]))) if np.any(mask) else 0.0

    def radius(self, target: float = TAIL_TARGET) -> float:
        """Polydisc radius on which the estimated degree-K tail stays below ``target``."""
        K = self.degree
        r = np.inf
        for d in (K - 1, K):
            if d < 1:
                continue
            a = self.degree_norm(d)
            if a > 0:
                r = min(r, (target / a) ** (1.0 / d))
        return float(r)

    def inside(self, x, radius: float | None = None) -> bool:
        radius = self.radius() if radius is None else radius
        return bool(np.max(np.abs(np.asarray(x) - np.asarray(self.base))) <= radius)

    def to_dict(self) -> dict:
        sp = self.space
        terms = []
        for i in range(self.coeffs.shape[0]):
            for k, a in enumerate(sp.indices):
                v = float(self.coeffs[i, k])
                if v != 0.0:
                    terms.append({"component": i + 1, "monomial": list(a), "coefficient": v})
        return {
            "label": None if self.label is None else list(self.label),
            "base_point": list(self.base),
            "order": self.degree,
            "consistency_residual": self.consistency,
            "terms": terms,
        }


class _Solver:
    """Degree-by-degree integrator sharing the jets of ``Γ`` and ``c`` at the base point."""

    def __init__(self, gamma: TensorJet, c: TensorJet, K: int, tol: float, base):
        self.base = tuple(float(v) for v in base)
        self.space = JetSpace.get(gamma.space.dim, K)
        self.K = K
        self.gamma = gamma.coeffs[..., : self.space.size] if gamma.order >= K else \
            gamma.space.embed(gamma.coeffs, self.space)
        self.c = c.coeffs[..., : self.space.size] if c.order >= K else c.space.embed(c.coeffs, self.space)
        self.tol = tol
        sp = self.space
        n = sp.dim
        # shift[j][k] = position of monomial indices[k] + e_j (or -1 beyond K)
        self.shift = np.full((n, sp.size), -1, dtype=int)
        for k, a in enumerate(sp.indices):
            if sum(a) < K:
                for j in range(n):
                    b = list(a)
                    b[j] += 1
                    self.shift[j, k] = sp.position[tuple(b)]

    def rhs(self, X: np.ndarray, prev: np.ndarray | None) -> np.ndarray:
        """``R[i, j] = −Γ^i_{jk} X^k + c^i_{jk} prev^k`` as series."""
        sp = self.space
        out = -sp.mul(self.gamma, X[None, None, :, :]).sum(axis=2)
        if prev is not None:
            out = out + sp.mul(self.c, prev[None, None, :, :]).sum(axis=2)
        return out

    def solve(self, const: np.ndarray, prev: np.ndarray | None, label) -> SeriesVectorField:
        sp = self.space
        n = sp.dim
        X = np.zeros((n, sp.size))
        X[:, 0] = const
        worst = 0.0
        for d in range(1, self.K + 1):
            R = self.rhs(X, prev)
            mask = sp.degrees == d - 1
            Rd = np.where(mask, R, 0.0)
            P = np.zeros((n, sp.size))
            for j in range(n):
                src = np.nonzero(mask)[0]
                P[:, self.shift[j, src]] += Rd[:, j][:, src]
            P /= d
            # closedness: ∂_j P must reproduce R_j in degree d-1
            scale = max(float(np.max(np.abs(Rd))), 1e-300)
            for j in range(n):
                low, dP = sp.diff(P, j)
                gap = dP - Rd[:, j, : low.size]
                worst = max(worst, float(np.max(np.abs(gap))) / max(scale, 1.0))
            if worst > self.tol:
                raise ConstructionError(
                    f"coefficient system inconsistent at degree {d} "
                    f"(residual {worst:.3e}); the recursion is not compatible here",
                    degree=d, residual=worst)
            X = X + P
        return SeriesVectorField(X, self.base, self.K, label=label, consistency=worst)


def flat_basis(gamma: TensorJet, x0: Sequence[float], K: int = 8, tol: float = 1e-10,
               c: TensorJet | None = None) -> list[SeriesVectorField]:
    """Series solutions of ``∇X = 0`` normalized to the coordinate basis at ``x0``."""
    if gamma.order >= 1:
        R = riemann_curvature(gamma)
        if np.max(np.abs(R)) > 1e-9 * max(1.0, curvature_scale(gamma)):
            raise ConstructionError(
                f"connection is not flat at the base point (max |R| = {np.max(np.abs(R)):.3e})")
    n = gamma.space.dim
    if c is None:
        c = TensorJet.constant(np.zeros((n, n, n)), n, 0)
    solver = _Solver(gamma, c, K, tol, x0)
    return [solver.solve(np.eye(n)[p], None, (p + 1, 0)) for p in range(n)]


def raise_level(prev: SeriesVectorField, c: TensorJet, gamma: TensorJet,
                const_term=None, tol: float = 1e-10) -> SeriesVectorField:
    """Solve ``∇_j X^i = c^i_{jk} X_prev^k`` with ``X(x0) = const_term``."""
    n = gamma.space.dim
    solver = _Solver(gamma, c, prev.degree, tol, prev.base)
    const = np.zeros(n) if const_term is None else np.asarray(const_term, dtype=float)
    label = None if prev.label is None else (prev.label[0], prev.label[1] + 1)
    return solver.solve(const, prev.coeffs, label)


@dataclass(frozen=True)
class CompatibilityResult:
    curvature: Residual
    mixed: Residual
    associativity: Residual

    def combined(self) -> Residual:
        return Residual.combine([self.curvature, self.mixed, self.associativity])


def compatibility_residual(c: TensorJet, gamma: TensorJet) -> CompatibilityResult:
    """The three obstruction brackets of the recursion, each indexed ``[i, j, l, m]``."""
    G, dG = gamma.value, gamma.d1
    cv, dc = c.value, c.d1  # dc[i, j, l, m] = ∂_m c^i_{jl}
    # curvature bracket ∂_mΓ^i_{jl} − ∂_jΓ^i_{ml} − Γ^i_{jk}Γ^k_{ml} + Γ^i_{mk}Γ^k_{jl}
    t = (np.einsum("ijlm->ijlm", dG), -np.einsum("imlj->ijlm", dG),
         -np.einsum("ijk,kml->ijlm", G, G), np.einsum("imk,kjl->ijlm", G, G))
    mixed = (dc, -np.einsum("imlj->ijlm", dc),
             -np.einsum("ikj,kml->ijlm", G, cv), -np.einsum("klm,ijk->ijlm", G, cv),
             np.einsum("ikm,kjl->ijlm", G, cv), np.einsum("klj,imk->ijlm", G, cv))
    assoc = (np.einsum("ijk,kml->ijlm", cv, cv), -np.einsum("imk,kjl->ijlm", cv, cv))
    return CompatibilityResult(Residual.of(sum(t), *t), Residual.of(sum(mixed), *mixed),
                               Residual.of(sum(assoc), *assoc))


# -- hierarchy ----------------------------------------------------------------

@dataclass
class Hierarchy:
    base: tuple[float, ...]
    K: int
    fields: dict = field(default_factory=dict)  # (p, α) -> SeriesVectorField

    def radius(self) -> float:
        return min((f.radius() for f in self.fields.values()), default=np.inf)

    def labels(self):
        return sorted(self.fields)

    def to_dict(self) -> dict:
        return {"base_point": list(self.base), "order": self.K,
                "radius": None if not np.isfinite(self.radius()) else self.radius(),
                "fields": [self.fields[k].to_dict() for k in self.labels()]}


def build_hierarchy(spec: ManifoldSpec, p_max: int | None = None, alpha_max: int = 2,
                    K: int = 8, const_terms: dict | None = None,
                    tol: float = 1e-10) -> Hierarchy:
    """All ``X_(p,α)`` with ``p ≤ p_max`` and ``α ≤ alpha_max`` (integration constants 0)."""
    if not spec.has_connection:
        raise ConstructionError("the hierarchy needs a connection or a metric")
    base = tuple(spec.base_point) if spec.base_point is not None else tuple(spec.center())
    gamma = spec.gamma(base, K)
    c = spec.c(base, K)
    n = spec.n
    p_max = n if p_max is None else p_max
    const_terms = const_terms or {}
    flat = flat_basis(gamma, base, K, tol)
    h = Hierarchy(base, K)
    for p in range(1, p_max + 1):
        X = flat[p - 1]
        h.fields[(p, 0)] = X
        for a in range(1, alpha_max + 1):
            X = raise_level(X, c, gamma, const_terms.get((p, a)), tol)
            h.fields[(p, a)] = X
    return h


def recursion_residual(X: TensorJet, prev: TensorJet | None, c: TensorJet,
                       gamma_value: np.ndarray) -> Residual:
    """``∇_j X^i − c^i_{jk} X_prev^k`` at a point."""
    D = covariant_derivative(X, gamma_value, (1, 0))
    terms = [X.d1, np.einsum("ijk,k->ij", gamma_value, X.value)]
    if prev is not None:
        cp = np.einsum("ijk,k->ij", c.value, prev.value)
        D = D - cp
        terms.append(cp)
    return Residual.of(D, *terms)


def deformed_flatness_residual(members: Sequence[TensorJet], c: TensorJet,
                               gamma: TensorJet, z: float) -> Residual:
    """``∇̃ X(z)`` for ``X(z) = Σ_α z^α X_α`` and ``Γ̃ = Γ − z c``, through order ``z^{α_max}``."""
    amax = len(members) - 1
    order = min(m.order for m in members)
    Xz = sum(m.truncate(order).coeffs * z ** a for a, m in enumerate(members))
    Xz = TensorJet(members[0].truncate(order).space, Xz)
    deformed = gamma.value - z * c.value
    D = covariant_derivative(Xz, deformed, (1, 0))
    top = z ** (amax + 1) * np.einsum("ijk,k->ij", c.value, members[-1].value)
    res = D + top
    terms = [Xz.d1, np.einsum("ijk,k->ij", gamma.value, Xz.value)]
    terms += [z ** (a + 1) * np.einsum("ijk,k->ij", c.value, m.value) for a, m in enumerate(members)]
    return Residual.of(res, *terms)


def pairwise_cc2(h: Hierarchy, spec: ManifoldSpec, points) -> dict:
    """Maximal (cc2) residual for every pair of hierarchy members over ``points``."""
    out = {}
    labels = h.labels()
    for x in points:
        c = spec.c(x, 1)
        jets = {k: h.fields[k].jet(x, 1) for k in labels}
        for a in range(len(labels)):
            for b in range(a + 1, len(labels)):
                r = sufficient_condition_residual(jets[labels[a]], jets[labels[b]], c).cc2
                key = (labels[a], labels[b])
                prev = out.get(key)
                out[key] = r if prev is None else Residual.combine([prev, r])
    return out
