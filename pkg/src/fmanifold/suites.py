"""Named check suites over seeded sample points, assembled into ``fman-report/1`` documents.

Every random quantity is drawn from a generator seeded by ``(seed, crc32(label))``
so that the checks are independent of each other's order and reproducible.
"""

from __future__ import annotations

import hashlib
import json
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import algebra, benney, compat, flows, geometry, hierarchy
from .errors import ConstructionError, EvaluationError, InapplicableSuiteError
from .fields import Residual, TensorJet
from .manifold import ManifoldSpec
from .report import POINT_ERRORS, CheckRecorder, Tolerance, build_report
from .specio import CheckSettings, SpecFile

SUITES = ("algebra", "flows", "flat", "compat", "riemannian", "benney", "all")

RANDOM_Z = 5                 # random fields Z for the Haantjes check
FLOW_PAIRS = 50              # vector-field pairs for the commutativity criteria
FLOW_POINTS = 16             # points (and jet states) per pair
FIELD_DEGREE = 2             # degree of random polynomial fields
DEFORMATION_Z = (0.0, 1.0, -2.0, 3.5)
HIERARCHY_ALPHA = 2
CHART_ORDER = 3              # jet order of reduction charts in the benney suite
MOMENT_CHAIN = 3
FLOW_TOL_REL = 1e-8
IDENTITY_TOL_REL = 1e-12
QEXP_TOL_REL = 1e-10
CONSISTENCY_TOL = 1e-10          # closedness of the series equations, analytic structures
ASSEMBLED_CONSISTENCY_TOL = 1e-8 # ... structures assembled numerically from residues


def spec_digest(spec: SpecFile) -> str:
    text = json.dumps(spec.raw, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class SuiteContext:
    spec: SpecFile
    settings: CheckSettings
    phi: object = "spec"
    alpha_max: int = HIERARCHY_ALPHA
    p_max: int | None = None
    recorder: CheckRecorder = None
    warnings: list = field(default_factory=list)
    _geo: ManifoldSpec | None = None
    _points: np.ndarray | None = None
    _flat: bool | None = None
    _hierarchy: object = None
    _charts: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.recorder is None:
            self.recorder = CheckRecorder(self.settings.tol_abs, self.settings.tol_rel)

    # -- randomness ------------------------------------------------------------

    def rng(self, label: str) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.settings.seed, zlib.crc32(label.encode())]))

    # -- the manifold and its sample points -------------------------------------

    @property
    def twist(self):
        return self.spec.phi if self.phi == "spec" else self.phi

    def geometry(self) -> ManifoldSpec:
        if self._geo is None:
            self._geo = self.spec.geometry(self.phi)
        return self._geo

    @property
    def chart_names(self) -> tuple[str, ...]:
        return self.geometry().coords

    def points(self) -> np.ndarray:
        if self._points is None:
            self._points = self.geometry().sample(np.random.default_rng(self.settings.seed),
                                                  self.settings.samples)
        return self._points

    def u_points(self) -> np.ndarray:
        box = self.spec.box
        rng = np.random.default_rng(self.settings.seed)
        return box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random((self.settings.samples, self.spec.n))

    def tol(self, rel: float | None = None, abs_: float | None = None) -> Tolerance:
        return Tolerance(self.settings.tol_abs if abs_ is None else abs_,
                         self.settings.tol_rel if rel is None else rel)

    def pointwise(self, name, fn, points=None, **kw):
        if points is None:
            points = self.points()
            kw.setdefault("chart", self.chart_names)
        return self.recorder.pointwise(name, points, fn, **kw)

    # -- shared constructions -----------------------------------------------------

    def diagonal_structure(self) -> bool:
        geo = self.geometry()
        return geo.canonical or isinstance(geo, benney.ReductionManifold)

    def is_flat(self) -> bool:
        if self._flat is None:
            geo = self.geometry()
            flat = geo.has_connection
            for x in self.points()[:4] if flat else ():
                try:
                    G = geo.gamma(x, 1)
                except POINT_ERRORS:
                    continue
                R = geometry.riemann_curvature(G)
                if not Residual.of(R, *geometry._curvature_terms(G.value, G.d1)).passes(
                        self.settings.tol_abs, self.settings.tol_rel):
                    flat = False
                    break
            self._flat = flat
        return self._flat

    def chart(self, u) -> benney.ReductionChart:
        key = tuple(float(v) for v in u)
        if key not in self._charts:
            self._charts[key] = benney.reduce(self.spec.lax, u, CHART_ORDER)
        return self._charts[key]

    def consistency_tol(self) -> float:
        assembled = isinstance(self.geometry(), benney.ReductionManifold)
        return ASSEMBLED_CONSISTENCY_TOL if assembled else CONSISTENCY_TOL

    def hierarchy(self):
        if self._hierarchy is None:
            self._hierarchy = hierarchy.build_hierarchy(
                self.geometry(), p_max=self.p_max, alpha_max=self.alpha_max, K=self.settings.order,
                tol=self.consistency_tol())
        return self._hierarchy

    def hierarchy_points(self, h) -> np.ndarray:
        """Sample points inside the polydisc where the truncated series are reliable."""
        radius = h.radius()
        pts = self.points()
        base = np.asarray(h.base)
        if np.all(np.max(np.abs(pts - base), axis=1) <= radius):
            return pts
        rng = self.rng("hierarchy.polydisc")
        return base + radius * rng.uniform(-1.0, 1.0, (self.settings.samples, len(base)))


# -- helpers --------------------------------------------------------------------

def _random_vectors(rng, count, n):
    return [rng.uniform(-1.0, 1.0, n) for _ in range(count)]


def _deformed_scale(G: TensorJet, c: TensorJet, z: float) -> float:
    cs = max(float(np.max(np.abs(c.d1))), float(np.max(np.abs(G.value))) * float(np.max(np.abs(c.value))))
    return geometry.curvature_scale(G) + abs(z) * cs + z * z * float(np.max(np.abs(c.value))) ** 2


# -- algebra ------------------------------------------------------------------------

def suite_algebra(ctx: SuiteContext) -> None:
    geo = ctx.geometry()
    n = geo.n
    c0 = lambda x: geo.c(x, 0).value  # noqa: E731
    c1 = lambda x: geo.c(x, 1)        # noqa: E731
    ctx.pointwise("algebra.commutativity", lambda x: algebra.commutativity_residual(c0(x)))
    ctx.pointwise("algebra.associativity", lambda x: algebra.associativity_residual(c0(x)))
    ctx.pointwise("algebra.hertling_manin", lambda x: algebra.hertling_manin_residual(c1(x)))
    if geo.witness is not None:
        w = np.asarray(geo.witness)
        r = algebra.hertling_manin_residual(c1(w))
        ctx.recorder.residual("algebra.hertling_manin_at_witness", r,
                              witness={"point": [float(v) for v in w], "residual": r.value,
                                       "coordinates": list(geo.coords)},
                              note="recorded witness point of the specification")

    rng = ctx.rng("algebra.hertling_manin_forms")
    vecs = [algebra.constant_field(v, n, 1) for v in _random_vectors(rng, 4, n)]
    X, Y, Z, W = vecs

    def hm_forms(x):
        c = c1(x)
        intrinsic = algebra.hertling_manin_intrinsic(c, X, Y, Z, W)
        comp = np.einsum("kijlm,i,j,l,m->k", algebra.hertling_manin_array(c),
                         X.value, Z.value, W.value, Y.value)
        return Residual.of(intrinsic - comp, intrinsic, comp,
                           *[np.einsum("kijlm,i,j,l,m->k", t, X.value, Z.value, W.value, Y.value)
                             for t in algebra._hm_terms(c)])
    ctx.pointwise("algebra.hertling_manin_forms", hm_forms, tol=ctx.tol(rel=IDENTITY_TOL_REL),
                  note="intrinsic bracket form against the component form on random vectors")

    Zs = [flows.random_polynomial_field(ctx.rng(f"algebra.haantjes.Z{k}"), n, FIELD_DEGREE)
          for k in range(RANDOM_Z)]
    ctx.pointwise("algebra.haantjes",
                  lambda x: [algebra.haantjes_residual(algebra.V_jet(c1(x), Z.jet(x, 1))) for Z in Zs],
                  note=f"{RANDOM_Z} random polynomial fields Z of degree {FIELD_DEGREE}")

    rng = ctx.rng("algebra.nijenhuis")
    nf = [flows.random_polynomial_field(rng, n, FIELD_DEGREE) for _ in range(3)]

    def nij(x):
        c = c1(x)
        Xj, Yj, Zj = (f.jet(x, 1) for f in nf)
        a = algebra.nijenhuis_rewritten(c, Xj, Yj, Zj)
        b = algebra.nijenhuis_of_product(c, Xj, Yj, Zj)
        return Residual.of(a - b, a, b)
    ctx.pointwise("algebra.nijenhuis_rewrite", nij,
                  note="Nijenhuis torsion of V_Z against its Hertling-Manin rewriting")

    if ctx.diagonal_structure():
        def diag(x):
            chk = algebra.diagonal_structure_check([c1(x)])
            return {"pattern": chk.pattern, "dependence": chk.dependence}
        ctx.pointwise("algebra.diagonal", diag, note="c^i_jk = f_i δ^i_j δ^i_k with f_i depending on r^i only")
        if geo.canonical:
            def canon(x):
                c = c0(x)
                e = np.zeros_like(c)
                for i in range(n):
                    e[i, i, i] = 1.0
                return Residual.of(c - e, c, e)
            ctx.pointwise("algebra.canonical_form", canon, note="f_i = 1")

    def unity(x):
        c = c1(x)
        e = algebra.unity_jet(c)
        return {"inverse": algebra.unity_residual(c.value, e.value),
                "lie": algebra.lie_unity_residual(c, e)}
    ctx.pointwise("algebra.unity", unity)

    zvec = _random_vectors(ctx.rng("algebra.eigen_gap"), 1, n)[0]
    gaps = []
    for x in ctx.points():
        try:
            gaps.append(algebra.min_eigen_gap(algebra.V_of(zvec, c0(x))))
        except POINT_ERRORS:
            continue
    ctx.recorder.info("algebra.eigen_gap", "minimal eigenvalue gap of V_Z for one random constant Z "
                      "(distinctness is only sampled)", value=min(gaps) if gaps else None,
                      points=len(gaps))


# -- flows ----------------------------------------------------------------------

def _commuting_family(ctx: SuiteContext):
    """Fields expected to generate commuting flows, or ``None``."""
    geo = ctx.geometry()
    n = geo.n
    if ctx.diagonal_structure():
        return "decoupled", None
    if ctx.is_flat():
        try:
            h = ctx.hierarchy()
        except (ConstructionError, *POINT_ERRORS):
            return None, None
        return "hierarchy", h
    return None, None


def _flow_pairs(ctx: SuiteContext):
    geo = ctx.geometry()
    n = geo.n
    rng = ctx.rng("flows.pairs")
    kind, h = _commuting_family(ctx)
    pairs = []
    for k in range(FLOW_PAIRS):
        if kind is None or k % 2 == 0:
            pairs.append(("generic", flows.random_polynomial_field(rng, n, FIELD_DEGREE),
                          flows.random_polynomial_field(rng, n, FIELD_DEGREE)))
        elif kind == "decoupled":
            pairs.append((kind, flows.decoupled_field(rng, n, FIELD_DEGREE),
                          flows.decoupled_field(rng, n, FIELD_DEGREE)))
        else:
            labels = h.labels()
            combo = []
            for _ in range(2):
                w = rng.uniform(-1.0, 1.0, len(labels))
                f = h.fields[labels[0]].scaled(w[0])
                for wk, lab in zip(w[1:], labels[1:]):
                    f = f + h.fields[lab].scaled(wk)
                combo.append(f)
            pairs.append((kind, *combo))
    return pairs, kind, h


def suite_flows(ctx: SuiteContext) -> None:
    geo = ctx.geometry()
    n = geo.n
    rec = ctx.recorder
    tol = ctx.tol(rel=max(ctx.settings.tol_rel, FLOW_TOL_REL))
    pairs, kind, h = _flow_pairs(ctx)
    pts = ctx.points()[:FLOW_POINTS]
    if kind == "hierarchy":
        pts = ctx.hierarchy_points(h)[:FLOW_POINTS]
    srng = ctx.rng("flows.states")
    states = [flows.JetState.random(srng, x) for x in pts]
    zrng = ctx.rng("flows.single_z")
    zs = _random_vectors(zrng, 3, n)

    disagree, implication, single_bad, evaluated, commuting = [], [], [], 0, 0
    errors = 0
    for idx, (label, X, Y) in enumerate(pairs):
        iff_ok = oracle_ok = cc2_ok = single_ok = True
        try:
            for x, s in zip(pts, states):
                c = geo.c(x, 1)
                Xj, Yj = X.jet(x, 1), Y.jet(x, 1)
                iff_ok &= tol.passes(flows.iff_commutativity_residual(Xj, Yj, c))
                oracle_ok &= tol.passes(flows.oracle_residual(Xj, Yj, c, s))
                cc2_ok &= tol.passes(flows.sufficient_condition_residual(Xj, Yj, c).cc2)
                single_ok &= all(tol.passes(flows.single_z_residual(Xj, Yj, c, z)) for z in zs)
        except POINT_ERRORS:
            errors += 1
            continue
        evaluated += 1
        commuting += oracle_ok
        if iff_ok != oracle_ok:
            disagree.append({"pair": idx, "family": label, "criterion": iff_ok, "oracle": oracle_ok})
        if cc2_ok and not iff_ok:
            implication.append({"pair": idx, "family": label})
        if single_ok != iff_ok:
            single_bad.append({"pair": idx, "family": label, "criterion": iff_ok, "single_z": single_ok})
    too_many = errors > 0.1 * len(pairs)
    fam = "generic random pairs" if kind is None else f"generic and {kind} pairs"
    rec.verdict("flows.criterion_oracle_agreement", not disagree and not too_many,
                note=f"{evaluated} {fam} ({commuting} commuting) at {len(pts)} points"
                     + (f"; {errors} pairs could not be evaluated" if errors else ""),
                value=float(len(disagree)), points=evaluated, failures=len(disagree),
                witness=disagree[0] if disagree else None)
    rec.verdict("flows.sufficient_implies_criterion", not implication and not too_many,
                note="no pair passing the sufficient condition may fail the criterion",
                value=float(len(implication)), points=evaluated, failures=len(implication),
                witness=implication[0] if implication else None)
    rec.verdict("flows.single_z_agreement", not single_bad and not too_many,
                note="single-vector form (3 random Z) against the polarized criterion",
                value=float(len(single_bad)), points=evaluated, failures=len(single_bad),
                witness=single_bad[0] if single_bad else None)

    qrng = ctx.rng("flows.qic")
    qf = [flows.random_polynomial_field(qrng, n, FIELD_DEGREE) for _ in range(3)]

    def qic(x):
        c = geo.c(x, 1)
        Xj, Yj, Zj = (f.jet(x, 1) for f in qf)
        a = flows.commdot_bracket(Xj, Yj, Zj, c)
        b = flows.qic_expression(Xj, Yj, Zj, c)
        return Residual.of(a - b, a, b)
    ctx.pointwise("flows.bracket_identity", qic, tol=ctx.tol(rel=IDENTITY_TOL_REL),
                  note="bracket expression against the Lie-derivative expression on random fields")

    def cc_forms(x):
        c = geo.c(x, 1)
        Xj, Yj = qf[0].jet(x, 1), qf[1].jet(x, 1)
        P = flows.sufficient_condition_array(Xj, Yj, c)
        Q = flows.cc3_array(Xj, Yj, c)
        return Residual.of(P - Q, P, Q)
    ctx.pointwise("flows.sufficient_forms", cc_forms, tol=ctx.tol(rel=IDENTITY_TOL_REL),
                  note="structure-constant form against the (1,1)-tensor form")


# -- flat --------------------------------------------------------------------------

def suite_flat(ctx: SuiteContext) -> None:
    geo = ctx.geometry()
    rec = ctx.recorder
    if not geo.has_connection:
        raise InapplicableSuiteError("the 'flat' suite needs a metric or a connection")
    ctx.pointwise("flat.torsion", lambda x: Residual.of(geometry.torsion(geo.gamma(x, 0).value),
                                                        geo.gamma(x, 0).value))

    def curv(x):
        G = geo.gamma(x, 1)
        return Residual(float(np.max(np.abs(geometry.riemann_curvature(G)))), geometry.curvature_scale(G))
    ctx.pointwise("flat.curvature", curv)

    def compat_res(x):
        r = hierarchy.compatibility_residual(geo.c(x, 1), geo.gamma(x, 1))
        return {"curvature": r.curvature, "mixed": r.mixed, "associativity": r.associativity}
    ctx.pointwise("flat.compatibility", compat_res)

    def pencil(x):
        G, c = geo.gamma(x, 1), geo.c(x, 1)
        return [Residual(float(np.max(np.abs(geometry.deformed_curvature(G, c, z)))),
                         _deformed_scale(G, c, z)) for z in DEFORMATION_Z]
    ctx.pointwise("flat.deformed_curvature", pencil, note=f"z in {list(DEFORMATION_Z)}")

    try:
        h = ctx.hierarchy()
    except (ConstructionError, *POINT_ERRORS) as exc:
        rec.error("flat.hierarchy.construction", exc)
        return
    worst = max(f.consistency for f in h.fields.values())
    radius = h.radius()
    rec.residual("flat.hierarchy.construction", Residual(worst, 0.0), tol=Tolerance(ctx.consistency_tol(), 0.0),
                 note=f"{len(h.fields)} series of order {h.K} about {[float(b) for b in h.base]}; "
                      f"polydisc radius {'unbounded' if not np.isfinite(radius) else f'{radius:.3e}'}")
    pts = ctx.hierarchy_points(h)
    labels = h.labels()
    ps = sorted({p for p, _ in labels})

    def recursion(x):
        c = geo.c(x, 1)
        G = geo.gamma(x, 0).value
        out = []
        for p, a in labels:
            prev = h.fields[(p, a - 1)].jet(x, 0) if a > 0 else None
            out.append(hierarchy.recursion_residual(h.fields[(p, a)].jet(x, 1), prev, c, G))
        return out
    ctx.pointwise("flat.hierarchy.recursion", recursion, points=pts, chart=geo.coords)

    def deformed(x):
        c = geo.c(x, 1)
        G = geo.gamma(x, 0)
        out = []
        for p in ps:
            members = [h.fields[(p, a)].jet(x, 1) for a in range(ctx.alpha_max + 1)]
            out += [hierarchy.deformed_flatness_residual(members, c, G, z) for z in DEFORMATION_Z[:3]]
        return out
    ctx.pointwise("flat.hierarchy.deformed_flatness", deformed, points=pts, chart=geo.coords,
                  note=f"z in {list(DEFORMATION_Z[:3])}")

    def pairs(x):
        c = geo.c(x, 1)
        jets = {k: h.fields[k].jet(x, 1) for k in labels}
        return [flows.sufficient_condition_residual(jets[a], jets[b], c).cc2
                for i, a in enumerate(labels) for b in labels[i + 1:]]
    npairs = len(labels) * (len(labels) - 1) // 2
    ctx.pointwise("flat.hierarchy.commutativity", pairs, points=pts, chart=geo.coords,
                  note=f"sufficient condition on all {npairs} pairs")

    def admissible(x):
        c = geo.c(x, 0).value
        G = geo.gamma(x, 0).value
        return [compat.admissible_residual(h.fields[k].jet(x, 1), c, G) for k in labels]
    ctx.pointwise("flat.hierarchy.admissible", admissible, points=pts, chart=geo.coords)


# -- compat --------------------------------------------------------------------------

def suite_compat(ctx: SuiteContext) -> None:
    geo = ctx.geometry()
    rec = ctx.recorder
    n = geo.n
    if not geo.has_connection:
        raise InapplicableSuiteError("the 'compat' suite needs a metric or a connection")
    G0 = lambda x: geo.gamma(x, 0).value  # noqa: E731
    R_of = lambda x: geometry.riemann_curvature(geo.gamma(x, 1))  # noqa: E731

    ctx.pointwise("compat.torsion", lambda x: Residual.of(geometry.torsion(G0(x)), G0(x)))
    ctx.pointwise("compat.scc", lambda x: geometry.scc_residual(geo.c(x, 1), G0(x)))
    ctx.pointwise("compat.shc", lambda x: compat.curvature_obstruction_residual(geo.c(x, 0).value, R_of(x)))
    ctx.pointwise("compat.bianchi_form", lambda x: compat.bianchi_form_residual(geo.c(x, 0).value, R_of(x)))
    vrng = ctx.rng("compat.vectorwise")
    vx = _random_vectors(vrng, 3, n)
    ctx.pointwise("compat.vectorwise",
                  lambda x: [compat.vectorwise_obstruction_residual(v, geo.c(x, 0).value, R_of(x)) for v in vx],
                  note="obstruction applied to 3 random vectors")
    ctx.pointwise("compat.curvature_antisymmetry", lambda x: geometry.curvature_antisymmetry_residual(R_of(x)))

    def curv(x):
        G = geo.gamma(x, 1)
        return Residual(float(np.max(np.abs(geometry.riemann_curvature(G)))), geometry.curvature_scale(G))
    ctx.pointwise("compat.curvature", curv, info=True, note="max |R| (the connection need not be flat)")

    def zindep(x):
        G, c = geo.gamma(x, 1), geo.c(x, 1)
        R0 = geometry.riemann_curvature(G)
        return [Residual(float(np.max(np.abs(geometry.deformed_curvature(G, c, z) - R0))),
                         _deformed_scale(G, c, z)) for z in DEFORMATION_Z[1:]]
    ctx.pointwise("compat.deformed_curvature", zindep,
                  note=f"curvature of Γ + z c minus curvature of Γ, z in {list(DEFORMATION_Z[1:])}")

    if geo.canonical:
        def identities(x):
            ids = compat.canonical_connection_identities(G0(x))
            return {"first": ids.first, "second": ids.second}
        ctx.pointwise("compat.canonical_identities", identities,
                      note="Γ^i_kk = −Γ^i_ki and Γ^i_kl = 0 for distinct indices")
        ctx.pointwise("compat.special_components", lambda x: compat.special_curvature_components(R_of(x)))

        def tsarev(x):
            r = compat.tsarev_compatibility_residual(geo.gamma(x, 1))
            return {"first": r.first, "second": r.second}
        ctx.pointwise("compat.tsarev_compatibility", tsarev,
                      note="compatibility of the linear system for diagonal velocities")

        tol = ctx.tol()
        mismatched, evaluated = [], 0
        for idx, x in enumerate(ctx.points()):
            try:
                R = R_of(x)
                c = geo.c(x, 0).value
                a = tol.passes(compat.curvature_obstruction_residual(c, R))
                b = compat.tsarev_compatibility_residual(geo.gamma(x, 1)).passes(tol.abs, tol.rel)
                d = tol.passes(compat.bianchi_form_residual(c, R))
            except POINT_ERRORS:
                continue
            evaluated += 1
            if not (a == b == d):
                mismatched.append({"index": idx, "point": [float(v) for v in x],
                                   "obstruction": a, "tsarev_compatibility": b, "bianchi_form": d})
        rec.verdict("compat.verdict_equivalence", not mismatched,
                    note="curvature obstruction, Tsarev compatibility and Bianchi form give identical verdicts",
                    value=float(len(mismatched)), points=evaluated, failures=len(mismatched),
                    witness=mismatched[0] if mismatched else None)
    else:
        for name in ("canonical_identities", "special_components", "tsarev_compatibility",
                     "verdict_equivalence"):
            rec.skip(f"compat.{name}", "needs canonical coordinates (c^i_jk = δ^i_j δ^i_k)")

    for name, f in sorted(geo.vector_fields.items()):
        ctx.pointwise(f"compat.admissible.{name}",
                      lambda x, f=f: compat.admissible_residual(f.jet(x, 1), geo.c(x, 0).value, G0(x)))


# -- riemannian --------------------------------------------------------------------

def suite_riemannian(ctx: SuiteContext) -> None:
    geo = ctx.geometry()
    rec = ctx.recorder
    n = geo.n
    if geo.metric is None:
        raise InapplicableSuiteError("the 'riemannian' suite needs a metric")
    ctx.pointwise("riemannian.metricity", lambda x: geometry.metricity_residual(geo.g(x, 1), geo.gamma(x, 0).value))

    def inv(x):
        r = compat.invariance_residual(geo.g(x, 0).value, geo.c(x, 0).value)
        return {"covariant": r.first, "contravariant": r.second}
    ctx.pointwise("riemannian.invariance", inv)

    if geo.canonical:
        def egorov(x):
            r = compat.egorov_check(geo.g(x, 1))
            return {"diagonal": r.first, "potential": r.second}
        ctx.pointwise("riemannian.egorov", egorov)
    else:
        rec.skip("riemannian.egorov", "needs canonical coordinates (c^i_jk = δ^i_j δ^i_k)")

    R_of = lambda x: geometry.riemann_curvature(geo.gamma(x, 1))  # noqa: E731
    ctx.pointwise("riemannian.curvature_antisymmetry", lambda x: geometry.curvature_antisymmetry_residual(R_of(x)))

    qrng = ctx.rng("riemannian.expansion_cyclic")
    fam = compat.QuadraticExpansion(tuple(_random_vectors(qrng, 3, n)),
                                    tuple(int(s) for s in qrng.choice([-1, 1], 3)))
    ctx.pointwise("riemannian.expansion_cyclic",
                  lambda x: compat.quadratic_expansion_check(fam, geo.g(x, 0).value, geo.c(x, 0).value,
                                                             R_of(x)).second,
                  tol=ctx.tol(rel=QEXP_TOL_REL),
                  note="cyclic identity of the quadratic expansion of a random family of 3 vectors")

    ex = ctx.spec.expansion
    if ex is not None:
        def expansion(x, pairing):
            Q = compat.QuadraticExpansion(tuple(geo.field(f).jet(x, 0).value for f in ex.fields), ex.signs)
            return compat.quadratic_expansion_check(Q, geo.g(x, 0).value, geo.c(x, 0).value,
                                                    R_of(x), pairing).first
        ctx.pointwise("riemannian.expansion", lambda x: expansion(x, ex.pairing),
                      note=f"curvature against the expansion of {list(ex.fields)} (pairing '{ex.pairing}')")
        other = "second" if ex.pairing == "first" else "first"
        ctx.pointwise(f"riemannian.expansion_{other}_pairing", lambda x: expansion(x, other), info=True,
                      note="the alternative index pairing, for comparison")


# -- benney ------------------------------------------------------------------------

def suite_benney(ctx: SuiteContext) -> None:
    spec = ctx.spec
    L = spec.lax
    if L is None:
        raise InapplicableSuiteError("the 'benney' suite needs a lax section")
    phi = ctx.twist
    pts = ctx.u_points()
    names = spec.coords
    rec = ctx.recorder

    def run(name, fn, **kw):
        return rec.pointwise(name, pts, lambda u: fn(ctx.chart(u)), chart=names, **kw)

    def crit(ch):
        lam, lp, lpp = L.p_derivatives(ch.u0, ch.v)
        return Residual.of(lp, lpp * max(1.0, float(np.max(np.abs(ch.v)))))
    run("benney.critical_points", crit, note=f"{L.n} real simple critical points of λ in p")

    def asym(u):
        tail = benney.laurent_tail(L, u, 1)
        log = 0.0 if tail.log is None else abs(float(tail.log[0]))
        low = [abs(float(tail.coefficient(k)[0])) for k in range(min(tail.val, 1), 1)]
        return Residual(max([log] + low), 1.0)
    rec.pointwise("benney.asymptotics", pts, asym, chart=names, info=not L.strict,
                  note="λ − p has no constant, positive-power or logarithmic terms at p = ∞" + ("" if L.strict else " (relaxed: reported only)"))

    run("benney.loewner", lambda ch: [benney.loewner_residual(ch, p0) for p0 in benney.loewner_probe_points(ch)],
        note="at two values of p outside the critical and singular points")

    def gt(ch):
        r = benney.gibbons_tsarev_residual(ch)
        return {"first": r.first, "second": r.second}
    run("benney.gibbons_tsarev", gt)
    run("benney.lambda_pp_identity", benney.lambda_pp_identity_residual)
    run("benney.moment_chain", lambda ch: benney.moment_chain_residual(ch, MOMENT_CHAIN),
        note=f"k ≤ {MOMENT_CHAIN}")

    def residues(ch):
        res = benney.residue_pairing(ch, phi)
        return {"metric": benney.diagonal_metric_residual(ch, res, phi),
                "structure": benney.canonical_structure_residual(res, ch, phi)}
    run("benney.residues", residues, note="metric against diag(φ_i ∂_i A⁰), structure against φ_i δ^i_j δ^i_k"
        if phi is not None else "metric against diag(∂_i A⁰), structure against δ^i_j δ^i_k")

    def coherence(ch):
        r = benney.chart_coherence_residual(ch, phi)
        return {"metric": r.first, "structure": r.second}
    run("benney.chart_coherence", coherence)

    def chsym(ch):
        g = benney.residue_pairing(ch, phi).g
        G = geometry.christoffel_from_metric(g)
        return compat.chsym_residual(ch.velocities(), G.value)
    run("benney.velocities_tsarev", chsym, note="characteristic velocities against the residue connection")
    run("benney.velocities_semi_hamiltonian",
        lambda ch: compat.semi_hamiltonian_residual(ch.velocities()),
        tol=ctx.tol(rel=max(ctx.settings.tol_rel, 1e-7)),
        note="vacuous for two components" if L.n < 3 else "")

    gaps = []
    for u in pts:
        try:
            gaps.append(compat.velocity_gap(ctx.chart(u).v))
        except POINT_ERRORS:
            continue
    rec.info("benney.velocity_gap", "minimal gap between characteristic velocities",
             value=min(gaps) if gaps else None, points=len(gaps))


# -- running ---------------------------------------------------------------------------

SUITE_FUNCTIONS = {
    "algebra": suite_algebra,
    "flows": suite_flows,
    "flat": suite_flat,
    "compat": suite_compat,
    "riemannian": suite_riemannian,
    "benney": suite_benney,
}


def applicable_suites(ctx: SuiteContext) -> list[str]:
    """The members of ``all`` for this specification."""
    geo = ctx.geometry()
    out = ["algebra", "flows"]
    if geo.has_connection:
        if ctx.is_flat():
            out.append("flat")
        out.append("compat")
    if geo.metric is not None:
        out.append("riemannian")
    if ctx.spec.lax is not None:
        out.append("benney")
    return out


def _check_applicable(spec: SpecFile, suite: str) -> None:
    if suite not in SUITES:
        raise InapplicableSuiteError(f"unknown suite '{suite}' (choose from {', '.join(SUITES)})")
    if suite == "benney" and spec.lax is None:
        raise InapplicableSuiteError("the 'benney' suite needs a lax section")
    if spec.manifold is not None:
        m = spec.manifold
        if suite in ("flat", "compat") and not m.has_connection:
            raise InapplicableSuiteError(f"the '{suite}' suite needs a metric or a connection")
        if suite == "riemannian" and m.metric is None:
            raise InapplicableSuiteError("the 'riemannian' suite needs a metric")


def environment(settings: CheckSettings) -> dict:
    return {
        "seed": settings.seed,
        "samples": settings.samples,
        "series_order": settings.order,
        "tol_abs": settings.tol_abs,
        "tol_rel": settings.tol_rel,
        "jet_orders": {"structure": 1, "connection": 1, "reduction_chart": CHART_ORDER},
        "random_fields": {"degree": FIELD_DEGREE, "haantjes": RANDOM_Z, "flow_pairs": FLOW_PAIRS,
                          "flow_points": FLOW_POINTS, "distribution": "uniform[-1,1]"},
    }


def spec_info(spec: SpecFile, twist=None) -> dict:
    return {
        "name": spec.name,
        "dimension": spec.n,
        "coordinates": list(spec.coords),
        "digest": spec_digest(spec),
        "lax": None if spec.lax is None else spec.lax.kind,
        "twist": None if twist is None else [str(t) for t in twist],
    }


def make_context(spec: SpecFile, settings: CheckSettings | None = None, phi="spec",
                 alpha_max: int = HIERARCHY_ALPHA, p_max: int | None = None) -> SuiteContext:
    return SuiteContext(spec, settings or spec.settings, phi, alpha_max=alpha_max, p_max=p_max)


def run_suite(spec: SpecFile, suite: str, settings: CheckSettings | None = None,
              phi="spec", phi_source=None) -> dict:
    """Run a named suite and return the ``fman-report/1`` document."""
    return run_in_context(make_context(spec, settings, phi), suite, phi_source)


def run_in_context(ctx: SuiteContext, suite: str, phi_source=None) -> dict:
    """Run ``suite`` in a prepared context (which keeps the constructions for reuse)."""
    spec, settings, phi = ctx.spec, ctx.settings, ctx.phi
    _check_applicable(spec, suite)
    if phi != "spec" and phi is not None and phi_source is None:
        raise ValueError("phi_source is required with an explicit phi")
    ran = []
    try:
        ctx.geometry()
    except POINT_ERRORS as exc:
        ctx.recorder.error("reduction.valid", exc)
        if suite in ("benney", "all") and spec.lax is not None:
            suite_benney(ctx)
            ran.append("benney")
    else:
        if spec.lax is not None and spec.manifold is None:
            ctx.recorder.verdict("reduction.valid", True,
                                 note="real simple critical points at the corners, centre and 64 random "
                                      "points of the box")
        names = applicable_suites(ctx) if suite == "all" else [suite]
        for name in names:
            SUITE_FUNCTIONS[name](ctx)
            ran.append(name)
    info = spec_info(spec, spec.phi_source if phi == "spec" else phi_source)
    env = environment(settings)
    env["suites"] = ran
    if suite == "flat" or "flat" in ran:
        env["hierarchy"] = {"alpha_max": ctx.alpha_max, "p_max": ctx.p_max}
    return build_report(info, suite, env, ctx.recorder.results, list(spec.warnings) + ctx.warnings)
