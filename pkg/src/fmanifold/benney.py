"""Hydrodynamic reductions of the Benney chain from a Lax function ``λ(p, u)``.

A reduction is a family ``λ = p + Σ_k A^k(u) p^{−k−1}`` with ``n`` simple real
critical points ``v^i(u)``.  The critical values ``r^i = λ(v^i)`` are Riemann
invariants; in that chart the residue pairings

    g(∂, ∂′)    = Σ_i res_{p=v^i} ∂λ ∂′λ / λ_p dp
    c(∂, ∂′, ∂″) = Σ_i res_{p=v^i} ∂λ ∂′λ ∂″λ / λ_p dp

define a Riemannian F-manifold with canonical coordinates ``r``.  Optional
weights ``φ_i(r^i)`` (for ``g``) and ``φ_i(r^i)²`` (for ``c``) give the twisted
structures.

Every quantity is carried as a jet: derivatives along the chart come from jet
arithmetic, the map ``u ↦ r`` is inverted by series reversion, and residues at
simple zeros of ``λ_p`` are read off joint jets in ``(chart, p)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

from .compat import ResidualPair
from .errors import EvaluationError, SpecError
from .expr import FieldExpr, eval_float, evaluate, parse, to_source
from .fields import CallableTensor, Residual, TensorJet
from .jets import Jet, JetSpace
from .manifold import ManifoldSpec
from .series import Laurent

DEFAULT_MOMENTS = 5
ROOT_GAP = 1e-8
SIMPLE_ROOT = 1e-10
PHI_VARIABLE = "r"
MIN_TENSOR_ORDER = 2


# -- Lax families -------------------------------------------------------------

@dataclass
class LaxFamily:
    """``λ(p, u)`` over a chart, with the finite singular points ``b_k(u)``.

    ``strict`` enforces ``λ − p = O(1/p)``; a relaxed family keeps whatever
    constant part ``λ − p`` has at ``p = ∞`` and reads the moments off the
    negative powers only.
    """

    kind: str
    chart: tuple[str, ...]
    expr: FieldExpr
    singular: tuple[FieldExpr, ...] = ()
    params: Mapping[str, float] = field(default_factory=dict)
    strict: bool = True
    window: float | None = None
    source: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.chart)

    @classmethod
    def rational(cls, chart, poles: Sequence[str], weights: Sequence[str],
                 params: Mapping[str, float] | None = None) -> "LaxFamily":
        """``λ = p + Σ_k a_k(u)/(p − b_k(u))``."""
        if len(poles) != len(weights):
            raise SpecError("rational family needs one weight per pole", "lax")
        chart = tuple(chart)
        prm = tuple(params or ())
        bs = [parse(str(b), chart, params=prm) for b in poles]
        as_ = [parse(str(a), chart, params=prm) for a in weights]
        src = "p" + "".join(f" + ({to_source(a.root)})/(p - ({to_source(b.root)}))"
                            for a, b in zip(as_, bs))
        lam = parse(src, chart, allow_p=True, params=prm)
        return cls("rational", chart, lam, tuple(bs), dict(params or {}),
                   source={"kind": "rational", "poles": [str(p) for p in poles],
                           "weights": [str(w) for w in weights]})

    @classmethod
    def logarithmic(cls, chart, points: Sequence[str], weights: Sequence[float],
                    params: Mapping[str, float] | None = None) -> "LaxFamily":
        """``λ = p + Σ_k ε_k ln|p − b_k(u)|`` with ``Σ ε_k = 0``."""
        if len(points) != len(weights):
            raise SpecError("logarithmic family needs one weight per branch point", "lax")
        eps = [float(e) for e in weights]
        if abs(sum(eps)) > 1e-12 * max(1.0, max(abs(e) for e in eps)):
            raise SpecError(f"logarithmic weights must sum to zero (sum = {sum(eps)!r})", "lax.weights")
        chart = tuple(chart)
        prm = tuple(params or ())
        bs = [parse(str(b), chart, params=prm) for b in points]
        # ln|p − b| is written as ½ ln((p − b)²) so that it is real on both sides of b
        src = "p" + "".join(f" + ({e!r})*(1/2)*ln((p - ({to_source(b.root)}))^2)"
                            for e, b in zip(eps, bs))
        lam = parse(src, chart, allow_p=True, params=prm)
        return cls("logarithmic", chart, lam, tuple(bs), dict(params or {}),
                   source={"kind": "logarithmic", "points": [str(p) for p in points],
                           "weights": eps})

    @classmethod
    def expression(cls, chart, src: str, singular: Sequence[str] = (),
                   params: Mapping[str, float] | None = None, strict: bool = True) -> "LaxFamily":
        chart = tuple(chart)
        prm = tuple(params or ())
        lam = parse(src, chart, allow_p=True, params=prm)
        bs = tuple(parse(str(b), chart, params=prm) for b in singular)
        return cls("expression", chart, lam, bs, dict(params or {}), strict=strict,
                   source={"kind": "expression", "lambda": src, "singular": [str(b) for b in singular]})

    # -- evaluation -------------------------------------------------------

    def evaluate(self, env: dict):
        env = dict(env)
        env.update(self.params)
        return evaluate(self.expr.root, env)

    def singular_values(self, u) -> np.ndarray:
        vals = [float(eval_float(b, u, self.params)) for b in self.singular]
        return np.unique(np.asarray(vals, dtype=float))

    def p_derivatives(self, u, p) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(λ, λ_p, λ_pp)`` at fixed ``u`` for an array of ``p`` values."""
        p = np.atleast_1d(np.asarray(p, dtype=float))
        sp = JetSpace.get(1, 2)
        try:
            return self._p_jets(sp, u, p)
        except EvaluationError:
            out = np.full((3, p.size), np.nan)
            for k, q in enumerate(p):
                try:
                    out[:, k] = np.ravel(self._p_jets(sp, u, np.array([q])))
                except EvaluationError:
                    pass
            return out[0], out[1], out[2]

    def _p_jets(self, sp, u, p):
        coeffs = np.zeros((p.size, sp.size))
        coeffs[:, 0] = p
        coeffs[:, 1] = 1.0
        env = {name: float(u[i]) for i, name in enumerate(self.chart)}
        env["p"] = Jet(sp, coeffs)
        val = self.evaluate(env)
        if not isinstance(val, Jet):
            raise EvaluationError("λ does not depend on p")
        c = np.broadcast_to(val.coeffs, (p.size, sp.size))
        return c[:, 0].copy(), c[:, 1].copy(), 2.0 * c[:, 2]

    def value(self, u, p) -> float:
        return float(self.p_derivatives(u, [p])[0][0])

    def to_dict(self) -> dict:
        out = dict(self.source)
        if not self.strict:
            out["asymptotics"] = "relaxed"
        return out


# -- moments ------------------------------------------------------------------

def laurent_tail(L: LaxFamily, u0, M: int, order: int = 0) -> Laurent:
    """``λ − p`` as a Laurent series in ``w = 1/p`` with jet coefficients in ``u``."""
    u0 = [float(x) for x in u0]
    sp = JetSpace.get(L.n, order)
    terms = M + 8
    env = {name: Jet(sp, sp.variable(i, u0)) for i, name in enumerate(L.chart)}
    env["p"] = Laurent.p(sp, terms)
    try:
        lam = L.evaluate(env)
    except EvaluationError as exc:
        raise exc.at(point=u0) from None
    if not isinstance(lam, Laurent):
        raise EvaluationError("λ does not depend on p", point=u0)
    tail = (lam - Laurent.p(sp, terms)).trimmed()
    if tail.prec < M + 2:
        raise EvaluationError(f"expansion at p = ∞ too short for {M + 1} moments", point=u0)
    return tail


def moments(L: LaxFamily, u0, M: int = DEFAULT_MOMENTS, order: int = 0,
            tol: float = 1e-12) -> np.ndarray:
    """Jets of ``A^0 … A^M`` at ``u0``, shape ``(M + 1, size)``.

    Raises when ``λ − p`` has a ``ln p``, constant or positive-power term (unless
    the family is relaxed), naming the offending coefficient.
    """
    tail = laurent_tail(L, u0, M, order)
    scale = 1.0 + max(float(np.max(np.abs(tail.coefficient(k)))) for k in range(1, M + 2))
    if tail.log is not None and np.max(np.abs(tail.log)) > tol * scale:
        raise EvaluationError(f"λ − p has a ln p term (coefficient {-tail.log[0]:.6g})",
                              point=u0)
    if L.strict:
        for k in range(tail.val, 1):
            coef = tail.coefficient(k)
            if np.max(np.abs(coef)) > tol * scale:
                raise EvaluationError(
                    f"λ − p has a p^{-k} term (coefficient {coef[0]:.6g}); "
                    f"expected λ = p + O(1/p)", point=u0)
    return np.stack([tail.coefficient(k + 1) for k in range(M + 1)])


# -- critical points ----------------------------------------------------------

def _scan_grids(L: LaxFamily, u) -> list[np.ndarray]:
    b = L.singular_values(u)
    W = L.window if L.window is not None else 20.0 + 10.0 * (float(np.max(np.abs(b))) if b.size else 0.0)
    s = np.geomspace(1e-9, 1.0, 400)
    if b.size == 0:
        return [np.linspace(-W, W, 4001)]
    grids = [b[0] - W * s[::-1], b[-1] + W * s]
    for lo, hi in zip(b[:-1], b[1:]):
        h = hi - lo
        grids.append(np.unique(np.concatenate([lo + 0.5 * h * s, hi - 0.5 * h * s[::-1]])))
    return grids


def _polish(L: LaxFamily, u, v: float) -> tuple[float, float, float]:
    for _ in range(4):
        _, lp, lpp = (x[0] for x in L.p_derivatives(u, [v]))
        if not np.isfinite(lpp) or lpp == 0.0:
            break
        step = lp / lpp
        v -= step
        if abs(step) <= 1e-16 * max(1.0, abs(v)):
            break
    _, lp, lpp = (x[0] for x in L.p_derivatives(u, [v]))
    return v, lp, lpp


def critical_points(L: LaxFamily, u0, seeds: Sequence[Sequence[float]] | None = None) -> np.ndarray:
    """The ``n`` real simple zeros of ``λ_p`` at ``u0``, ascending.

    ``seeds`` optionally lists brackets ``(a, b)`` with a sign change of ``λ_p``;
    otherwise every interval between consecutive singular points is scanned.
    """
    u0 = tuple(float(x) for x in u0)

    def lam_p(q):
        return float(L.p_derivatives(u0, [q])[1][0])

    brackets = []
    if seeds is not None:
        brackets = [(float(a), float(b)) for a, b in seeds]
    else:
        for grid in _scan_grids(L, u0):
            f = L.p_derivatives(u0, grid)[1]
            ok = np.isfinite(f)
            for k in range(grid.size - 1):
                if ok[k] and ok[k + 1]:
                    if f[k] == 0.0:
                        brackets.append((grid[k], grid[k]))
                    elif f[k] * f[k + 1] < 0.0:
                        brackets.append((grid[k], grid[k + 1]))
    roots = []
    for a, b in brackets:
        try:
            v = a if a == b else brentq(lam_p, a, b, xtol=1e-15, rtol=1e-15, maxiter=200)
        except (ValueError, RuntimeError) as exc:
            raise EvaluationError(f"critical point search failed in [{a}, {b}]: {exc}", point=u0) from None
        v, lp, lpp = _polish(L, u0, v)
        if not abs(lp) <= 1e-12 * (1.0 + abs(lpp) * max(1.0, abs(v))):
            raise EvaluationError(f"critical point near {v!r} did not converge (λ_p = {lp:.3e})", point=u0)
        if not abs(lpp) > SIMPLE_ROOT:
            raise EvaluationError(f"critical point {v!r} is not simple (λ_pp = {lpp:.3e})", point=u0)
        roots.append(v)
    roots = np.sort(np.asarray(roots, dtype=float))
    if roots.size > 1 and np.min(np.diff(roots)) < ROOT_GAP:
        raise EvaluationError(f"coinciding critical points (gap {np.min(np.diff(roots)):.3e})", point=u0)
    if roots.size != L.n:
        raise EvaluationError(f"found {roots.size} real critical points of λ, need {L.n}", point=u0)
    return roots


def riemann_invariant_values(L: LaxFamily, u0) -> tuple[np.ndarray, np.ndarray]:
    """Critical points and critical values at ``u0`` (floats only)."""
    v = critical_points(L, u0)
    r = np.array([L.value(u0, q) for q in v])
    return v, r


# -- reduction chart ----------------------------------------------------------

def _lambda_jet(L: LaxFamily, space: JetSpace, u_coeffs, p_coeffs) -> np.ndarray:
    env = {name: Jet(space, u_coeffs[i]) for i, name in enumerate(L.chart)}
    env["p"] = Jet(space, p_coeffs)
    out = L.evaluate(env)
    return out.coeffs if isinstance(out, Jet) else space.constant(out)


@dataclass
class ReductionChart:
    """Jets at one point ``u0`` of the reduction data, in both charts.

    ``v_u``, ``r_u`` are jets in ``u`` about ``u0``; ``u_r`` are the jets of the
    inverse map in ``r`` about ``r0``; all have order ``order``.
    """

    family: LaxFamily
    u0: tuple[float, ...]
    order: int
    v: np.ndarray
    r: np.ndarray
    lam_pp: np.ndarray
    jacobian: np.ndarray
    v_u: np.ndarray
    r_u: np.ndarray
    u_r: np.ndarray
    _moments: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return len(self.u0)

    @property
    def u_space(self) -> JetSpace:
        return JetSpace.get(self.n, self.order)

    @property
    def r_space(self) -> JetSpace:
        return JetSpace.get(self.n, self.order)

    @property
    def inverse_jacobian(self) -> np.ndarray:
        return np.linalg.inv(self.jacobian)

    def to_r(self, a: np.ndarray) -> np.ndarray:
        """Re-express jets in ``u`` (about ``u0``) as jets in ``r`` (about ``r0``)."""
        return self.u_space.compose(a, list(self.u_r), self.u0, self.r_space)

    def velocities(self) -> TensorJet:
        """``v^i`` as jets in the ``r`` chart."""
        return TensorJet(self.r_space, self.to_r(self.v_u))

    def moments_u(self, M: int) -> np.ndarray:
        hit = self._moments.get(("u", M))
        if hit is None:
            hit = moments(self.family, self.u0, M, self.order)
            self._moments[("u", M)] = hit
        return hit

    def moments_r(self, M: int) -> TensorJet:
        hit = self._moments.get(("r", M))
        if hit is None:
            hit = TensorJet(self.r_space, self.to_r(self.moments_u(M)))
            self._moments[("r", M)] = hit
        return hit


def _critical_jets(L: LaxFamily, u0, v0: float, order: int, max_iter: int | None = None):
    """Jets in ``u`` of the critical point through ``v0`` and of its critical value."""
    n = L.n
    su = JetSpace.get(n, order)
    sx = JetSpace.get(n + 1, order + 1)
    base = list(u0) + [0.0]
    u_coeffs = [sx.variable(j, base) for j in range(n)]
    eps = sx.variable(n, base)
    keep = tuple(range(n))
    v = su.constant(v0)
    step = np.inf
    first = None
    for it in range(max_iter or 4 * (order + 3)):
        lam = _lambda_jet(L, sx, u_coeffs, su.embed(v, sx) + eps)
        s1, lp = sx.diff(lam, n)
        s2, lpp = s1.diff(lp, n)
        _, F = s1.restrict(lp, keep)
        lowp, dF = s2.restrict(lpp, keep)
        dF = lowp.embed(dF, su)
        delta = su.mul(F, su.reciprocal(dF))
        new_step = float(np.max(np.abs(delta)))
        first = new_step if first is None else first
        v = v - delta
        # rounding in the corrections scales with the size of the first correction
        scale = max(1.0, float(np.max(np.abs(v))), first)
        # each sweep fixes at least one more degree; stop at rounding level
        if new_step <= 1e-15 * scale or (it > order + 1 and new_step >= step):
            break
        step = new_step
    if new_step > 1e-13 * scale:
        raise EvaluationError(f"critical-point jets did not converge (step {new_step:.3e})", point=u0)
    lam = _lambda_jet(L, sx, u_coeffs, su.embed(v, sx) + eps)
    _, r = sx.restrict(lam, keep)
    return v, r[: su.size]


def reduce(L: LaxFamily, u0, order: int = 2) -> ReductionChart:
    """Critical points, Riemann invariants and their jets of order ``order`` at ``u0``."""
    u0 = tuple(float(x) for x in u0)
    order = max(int(order), 1)
    n = L.n
    v0 = critical_points(L, u0)
    su = JetSpace.get(n, order)
    v_u = np.zeros((n, su.size))
    r_u = np.zeros((n, su.size))
    for i, q in enumerate(v0):
        v_u[i], r_u[i] = _critical_jets(L, u0, q, order)
    lam_pp = np.array([L.p_derivatives(u0, [q])[2][0] for q in v0])
    J = su.gradient(r_u)
    if not np.all(np.isfinite(J)) or abs(np.linalg.det(J)) < 1e-12 * max(1.0, np.max(np.abs(J))) ** n:
        raise EvaluationError("the Jacobian ∂r/∂u is singular", point=u0)
    Jinv = np.linalg.inv(J)
    r0 = r_u[:, 0].copy()
    sr = su
    rho = np.stack([sr.variable(j, r0) for j in range(n)])
    U = sr.constant(np.array(u0)) + np.einsum("jk,kN->jN", Jinv, rho - sr.constant(r0))
    for _ in range(order + 1):
        E = su.compose(r_u, list(U), u0, sr) - rho
        U = U - np.einsum("jk,kN->jN", Jinv, E)
        if np.max(np.abs(E)) <= 1e-16 * max(1.0, float(np.max(np.abs(r_u)))):
            break
    return ReductionChart(L, u0, order, v0, r0, lam_pp, J, v_u, r_u, U)


def riemann_invariants(L: LaxFamily, u0, order: int = 2) -> ReductionChart:
    return reduce(L, u0, order)


# -- residue pairing ----------------------------------------------------------

def parse_phi(sources: Sequence[str], params: Mapping[str, float] | None = None) -> tuple[FieldExpr, ...]:
    """Twist functions ``φ_i`` written in the single variable ``r``."""
    return tuple(parse(str(s), (PHI_VARIABLE,), params=tuple(params or ())) for s in sources)


def _phi_jets(phi, space: JetSpace, r_coeffs: np.ndarray, params=None) -> np.ndarray:
    out = np.zeros((len(phi), space.size))
    for i, e in enumerate(phi):
        env = {PHI_VARIABLE: Jet(space, r_coeffs[i])}
        env.update(params or {})
        val = evaluate(e.root, env)
        out[i] = val.coeffs if isinstance(val, Jet) else space.constant(val)
    return out


def _residues(L: LaxFamily, space: JetSpace, x0, u_coeffs, v_coeffs, r_coeffs, v0, phi=None):
    """``(g_ab, c_abc)`` as jets of order ``space.order − 2`` in the chart of ``space``.

    ``u_coeffs``, ``v_coeffs``, ``r_coeffs`` are the jets of ``u``, ``v^i`` and
    ``r^i`` in that chart.  At a simple zero of ``λ_p`` the residue of
    ``N/λ_p`` is ``N/λ_pp`` evaluated at ``p = v^i``.
    """
    n = space.dim
    W = space.order
    if W < 2:
        raise ValueError("residue tensors need chart jets of order >= 2")
    sp = JetSpace.get(n + 1, W)
    s1 = JetSpace.get(n + 1, W - 1)
    s2 = JetSpace.get(n + 1, W - 2)
    out_space = JetSpace.get(n, W - 2)
    U = space.embed(u_coeffs, sp)
    inner = [out_space.variable(j, x0) for j in range(n)]
    g = np.zeros((n, n, out_space.size))
    c = np.zeros((n, n, n, out_space.size))
    weights = None
    if phi is not None:
        weights = _phi_jets(phi, out_space, r_coeffs[:, : out_space.size], L.params)
    for i in range(n):
        base = list(x0) + [float(v0[i])]
        lam = _lambda_jet(L, sp, U, sp.variable(n, base))
        d = np.stack([sp.diff(lam, a)[1] for a in range(n)])[:, : s2.size]
        _, lp = sp.diff(lam, n)
        _, lpp = s1.diff(lp, n)
        inv = s2.reciprocal(lpp)
        Ng = s2.mul(d[:, None], d[None, :])
        Nc = s2.mul(Ng[:, :, None], d[None, None, :])
        at = inner + [v_coeffs[i][: out_space.size]]
        gi = s2.compose(s2.mul(Ng, inv), at, base, out_space)
        ci = s2.compose(s2.mul(Nc, inv), at, base, out_space)
        if weights is not None:
            gi = out_space.mul(gi, weights[i])
            ci = out_space.mul(ci, out_space.mul(weights[i], weights[i]))
        g += gi
        c += ci
    return TensorJet(out_space, g), TensorJet(out_space, c)


@dataclass(frozen=True)
class ResidueTensors:
    g: TensorJet          # g_ab
    c_lower: TensorJet    # c_abc
    c: TensorJet          # c^a_bc = g^{ad} c_dbc


def _raise(g: TensorJet, c_lower: TensorJet) -> TensorJet:
    sp = g.space
    ginv = sp.inverse_matrix(g.coeffs)
    return TensorJet(sp, sp.mul(ginv[:, :, None, None], c_lower.coeffs[None]).sum(axis=1))


def residue_pairing(chart: ReductionChart, phi=None) -> ResidueTensors:
    """Residue metric and structure constants in the ``r`` chart (order ``chart.order − 2``)."""
    sr = chart.r_space
    r_id = np.stack([sr.variable(j, chart.r) for j in range(chart.n)])
    g, cl = _residues(chart.family, sr, chart.r, chart.u_r, chart.to_r(chart.v_u), r_id, chart.v, phi)
    return ResidueTensors(g, cl, _raise(g, cl))


def residue_pairing_u(chart: ReductionChart, phi=None) -> ResidueTensors:
    """The same pairings evaluated directly in the ``u`` chart."""
    su = chart.u_space
    u_id = np.stack([su.variable(j, chart.u0) for j in range(chart.n)])
    g, cl = _residues(chart.family, su, chart.u0, u_id, chart.v_u, chart.r_u, chart.v, phi)
    return ResidueTensors(g, cl, _raise(g, cl))


# -- residual checks ----------------------------------------------------------

def loewner_residual(chart: ReductionChart, p0: float) -> Residual:
    """``∂λ/∂r^i − ∂_i A⁰ λ_p/(p − v^i)`` at ``p0``, derivatives at fixed ``p``."""
    L = chart.family
    n = chart.n
    if np.min(np.abs(p0 - chart.v)) < 1e-9:
        raise EvaluationError(f"p0 = {p0!r} is a critical point", point=chart.u0)
    sp = JetSpace.get(n + 1, 1)
    base = list(chart.r) + [float(p0)]
    sr1 = JetSpace.get(n, 1)
    U = sr1.embed(chart.u_r[:, : sr1.size], sp)
    lam = _lambda_jet(L, sp, U, sp.variable(n, base))
    if not np.isfinite(lam[0]):
        raise EvaluationError(f"λ is singular at p0 = {p0!r}", point=chart.u0)
    grad = sp.gradient(lam)
    dlam, lp = grad[:n], grad[n]
    dA0 = chart.moments_r(0).d1[0]
    rhs = dA0 * lp / (p0 - chart.v)
    return Residual.of(dlam - rhs, dlam, rhs)


def loewner_probe_points(chart: ReductionChart) -> list[float]:
    """Two values of ``p`` away from critical and singular points."""
    pts = np.concatenate([chart.v, chart.family.singular_values(chart.u0)])
    lo, hi = float(np.min(pts)), float(np.max(pts))
    return [hi + 0.7313, lo - 0.5417]


def gibbons_tsarev_residual(chart: ReductionChart) -> ResidualPair:
    """``∂_i v^j − ∂_i A⁰/(v^i − v^j)`` and ``∂_i∂_j A⁰ − 2∂_iA⁰∂_jA⁰/(v^i − v^j)²``."""
    if chart.order < 2:
        raise ValueError("second-order chart jets are required")
    v = chart.velocities()
    A0 = chart.moments_r(0)
    dv = v.d1                      # dv[j, i] = ∂_i v^j
    dA = A0.d1[0]
    hA = A0.d2[0]
    gaps = v.value[:, None] - v.value[None, :]
    n = chart.n
    r1, t1, r2, t2 = [], [], [], []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if abs(gaps[i, j]) < ROOT_GAP:
                raise EvaluationError("coinciding characteristic velocities", point=chart.u0)
            a = dA[i] / gaps[i, j]
            r1.append(dv[j, i] - a)
            t1.extend([dv[j, i], a])
            b = 2.0 * dA[i] * dA[j] / gaps[i, j] ** 2
            r2.append(hA[i, j] - b)
            t2.extend([hA[i, j], b])
    return ResidualPair(Residual.of(np.array(r1), np.array(t1)),
                        Residual.of(np.array(r2), np.array(t2)))


def lambda_pp_identity_residual(chart: ReductionChart) -> Residual:
    """``λ_pp(v^i) ∂_i A⁰ − 1``."""
    dA = chart.moments_r(0).d1[0]
    if np.min(np.abs(dA)) == 0.0:
        raise EvaluationError("∂_i A⁰ vanishes", point=chart.u0)
    prod = chart.lam_pp * dA
    return Residual.of(prod - 1.0, prod, np.ones_like(prod))


def moment_chain_residual(chart: ReductionChart, M: int = 3) -> Residual:
    """``∂_i A^k v^i − ∂_i A^{k+1} − k A^{k−1} ∂_i A⁰`` for ``k ≤ M`` (no sum over ``i``)."""
    A = chart.moments_r(M + 1)
    val, dA = A.value, A.d1        # dA[k, i]
    v = chart.v
    res, terms = [], []
    for k in range(M + 1):
        a = dA[k] * v
        b = dA[k + 1]
        cterm = k * val[k - 1] * dA[0] if k > 0 else np.zeros_like(a)
        res.append(a - b - cterm)
        terms.extend([a, b, cterm])
    return Residual.of(np.array(res), np.array(terms))


def diagonal_metric_residual(chart: ReductionChart, res: ResidueTensors, phi=None) -> Residual:
    """Residue metric against ``diag(φ_i ∂_i A⁰)``."""
    dA = chart.moments_r(0).d1[0]
    w = np.ones(chart.n) if phi is None else _phi_jets(phi, JetSpace.get(chart.n, 0),
                                                        chart.r[:, None], chart.family.params)[:, 0]
    expect = np.diag(w * dA)
    return Residual.of(res.g.value - expect, res.g.value, expect)


def canonical_structure_residual(res: ResidueTensors, chart: ReductionChart, phi=None) -> Residual:
    """``c^a_{bc}`` against ``φ_a δ^a_b δ^a_c``."""
    n = chart.n
    w = np.ones(n) if phi is None else _phi_jets(phi, JetSpace.get(n, 0),
                                                  chart.r[:, None], chart.family.params)[:, 0]
    expect = np.zeros((n, n, n))
    for a in range(n):
        expect[a, a, a] = w[a]
    return Residual.of(res.c.value - expect, res.c.value, expect)


def chart_coherence_residual(chart: ReductionChart, phi=None) -> ResidualPair:
    """Residue tensors computed in ``u`` and pulled to ``r`` versus direct ``r`` evaluation."""
    direct = residue_pairing(chart, phi)
    via_u = residue_pairing_u(chart, phi)
    M = chart.inverse_jacobian          # ∂u^a/∂r^i
    g = np.einsum("ai,bj,ab->ij", M, M, via_u.g.value)
    c = np.einsum("ai,bj,ck,abc->ijk", M, M, M, via_u.c_lower.value)
    return ResidualPair(Residual.of(g - direct.g.value, g, direct.g.value),
                        Residual.of(c - direct.c_lower.value, c, direct.c_lower.value))


# -- assembled Riemannian F-manifold ------------------------------------------

class ReductionManifold(ManifoldSpec):
    """Riemannian F-manifold of a reduction, in the Riemann-invariant chart.

    Points of the ``r`` chart are mapped back to ``u`` by Newton's method
    seeded with previously visited points.
    """

    def __init__(self, family: LaxFamily, u_box, phi=None, name: str = "reduction",
                 description: str = "", check_points: int = 64, seed: int = 0):
        self.family = family
        self.u_box = np.asarray(u_box, dtype=float).reshape(family.n, 2)
        self.phi = None if phi is None else tuple(phi)
        self._u_of: dict[tuple, np.ndarray] = {}
        self._charts: dict = {}
        self._tensors: dict = {}
        n = family.n
        images = self._validate(check_points, seed)
        box = np.stack([images.min(axis=0), images.max(axis=0)], axis=1)
        super().__init__(
            name=name, coords=tuple(f"r{i + 1}" for i in range(n)),
            structure=CallableTensor(self._c_jet, (n, n, n)), box=box,
            metric=CallableTensor(self._g_jet, (n, n)), canonical=self.phi is None,
            lax=family, params=dict(family.params), description=description)

    # -- chart maps ---------------------------------------------------------

    def _validate(self, count: int, seed: int) -> np.ndarray:
        lo, hi = self.u_box[:, 0], self.u_box[:, 1]
        n = self.family.n
        corners = np.array(np.meshgrid(*self.u_box)).reshape(n, -1).T
        rng = np.random.default_rng(seed)
        pts = np.concatenate([corners, [self.u_box.mean(axis=1)], lo + (hi - lo) * rng.random((count, n))])
        return np.array([self.r_of_u(u) for u in pts])

    def r_of_u(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        _, r = riemann_invariant_values(self.family, u)
        self._u_of[_key(r)] = u
        return r

    def u_of_r(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        hit = self._u_of.get(_key(r))
        if hit is not None:
            return hit
        known = list(self._u_of.items())
        if known:
            dist = [np.max(np.abs(np.array(k) - r)) for k, _ in known]
            u = known[int(np.argmin(dist))][1].copy()
        else:
            u = self.u_box.mean(axis=1)
        for _ in range(60):
            ch = reduce(self.family, u, 1)
            err = ch.r - r
            step = np.linalg.solve(ch.jacobian, err)
            u = u - step
            if np.max(np.abs(step)) <= 1e-15 * max(1.0, float(np.max(np.abs(u)))):
                break
        else:
            raise EvaluationError("could not map the point back to the u chart", point=r)
        _, r_check = riemann_invariant_values(self.family, u)
        if np.max(np.abs(r_check - r)) > 1e-10 * max(1.0, float(np.max(np.abs(r)))):
            raise EvaluationError("could not map the point back to the u chart", point=r)
        self._u_of[_key(r)] = u
        return u

    def chart(self, x0, order: int) -> ReductionChart:
        key = _key(x0)
        hit = self._charts.get(key)
        if hit is None or hit.order < order:
            hit = reduce(self.family, self.u_of_r(x0), order)
            self._charts[key] = hit
        return hit

    def tensors(self, x0, order: int) -> ResidueTensors:
        key = _key(x0)
        hit = self._tensors.get(key)
        if hit is None or hit.g.order < order:
            # one chart serves c (order 1) and the connection (metric order 2)
            order = max(order, MIN_TENSOR_ORDER)
            try:
                hit = residue_pairing(self.chart(x0, order + 2), self.phi)
            except EvaluationError as exc:
                raise exc.at(point=x0) from None
            self._tensors[key] = hit
        return hit

    def _g_jet(self, x0, order):
        return self.tensors(x0, order).g.truncate(order)

    def _c_jet(self, x0, order):
        return self.tensors(x0, order).c.truncate(order)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        lo, hi = self.u_box[:, 0], self.u_box[:, 1]
        us = lo + (hi - lo) * rng.random((count, self.n))
        return np.array([self.r_of_u(u) for u in us])

    def center(self) -> np.ndarray:
        return self.r_of_u(self.u_box.mean(axis=1))


def _key(x) -> tuple:
    return tuple(float(v) for v in np.asarray(x, dtype=float))


def build_riemannian_fmanifold(L: LaxFamily, box, phi=None, name: str = "reduction",
                               description: str = "") -> ReductionManifold:
    """Assemble the residue structure of ``L`` on the ``u`` box ``box``.

    Raises :class:`EvaluationError` (with a witness point) when the reduction
    is not valid somewhere on the box.
    """
    return ReductionManifold(L, box, phi, name=name, description=description)
