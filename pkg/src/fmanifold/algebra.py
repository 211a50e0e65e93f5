"""The multiplicative structure: product identities, Hertling–Manin, Nijenhuis/Haantjes, unity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError
from .fields import Residual, TensorJet
from .geometry import lie_derivative_c


# -- pointwise algebra --------------------------------------------------------

def product(X: np.ndarray, Y: np.ndarray, c: np.ndarray) -> np.ndarray:
    """``(X∘Y)^i = c^i_{jk} X^j Y^k``."""
    return np.einsum("ijk,j,k->i", c, X, Y)


def V_of(Z: np.ndarray, c: np.ndarray) -> np.ndarray:
    """``(V_Z)^i_j = c^i_{jk} Z^k``."""
    return np.einsum("ijk,k->ij", c, Z)


def associativity_residual(c: np.ndarray) -> Residual:
    left = np.einsum("mjk,iml->ijkl", c, c)
    right = np.einsum("mkl,ijm->ijkl", c, c)
    return Residual.of(left - right, left, right)


def commutativity_residual(c: np.ndarray) -> Residual:
    return Residual.of(c - c.transpose(0, 2, 1), c)


def _hm_terms(c: TensorJet):
    """Summands of the Hertling–Manin condition on coordinate fields.

    Indexed ``[k, i, j, l, m]``; equals the coordinate-free nine-bracket form
    evaluated at ``(X, Y, Z, W) = (∂_i, ∂_m, ∂_j, ∂_l)``.
    """
    v, dc = c.value, c.d1  # dc[k, j, l, s] = ∂_s c^k_{jl}
    sub = "kijlm"
    return (
        np.einsum(f"kjls,sim->{sub}", dc, v),    # (∂_s c^k_{jl}) c^s_{im}
        np.einsum(f"simj,ksl->{sub}", dc, v),    # (∂_j c^s_{im}) c^k_{sl}
        np.einsum(f"siml,ksj->{sub}", dc, v),    # (∂_l c^s_{im}) c^k_{sj}
        -np.einsum(f"kims,sjl->{sub}", dc, v),   # (∂_s c^k_{im}) c^s_{jl}
        -np.einsum(f"sjli,ksm->{sub}", dc, v),   # (∂_i c^s_{jl}) c^k_{sm}
        -np.einsum(f"sjlm,ksi->{sub}", dc, v),   # (∂_m c^s_{jl}) c^k_{si}
    )


def hertling_manin_array(c: TensorJet) -> np.ndarray:
    """Six-term Hertling–Manin expression, indexed ``[k, i, j, l, m]``."""
    return sum(_hm_terms(c))


def hertling_manin_residual(c: TensorJet) -> Residual:
    terms = _hm_terms(c)
    return Residual.of(sum(terms), *terms)


# -- vector fields as jets ----------------------------------------------------

def circ(c: TensorJet, A: TensorJet, B: TensorJet) -> TensorJet:
    """Jet of the product field ``A∘B`` (order is the minimum of the inputs)."""
    order = min(c.order, A.order, B.order)
    c, A, B = c.truncate(order), A.truncate(order), B.truncate(order)
    sp = c.space
    AB = sp.mul(A.coeffs[:, None, :], B.coeffs[None, :, :])
    return TensorJet(sp, sp.mul(c.coeffs, AB[None]).sum(axis=(1, 2)))


def bracket(A: TensorJet, B: TensorJet) -> np.ndarray:
    """``[A, B]`` at the base point."""
    return np.einsum("m,im->i", A.value, B.d1) - np.einsum("m,im->i", B.value, A.d1)


def bracket_jet(A: TensorJet, B: TensorJet) -> TensorJet:
    """Jet of ``[A, B]`` of order ``min(order) - 1``."""
    order = min(A.order, B.order)
    A, B = A.truncate(order), B.truncate(order)
    sp = A.space
    n = sp.dim
    low = None
    out = 0.0
    for m in range(n):
        low, dB = sp.diff(B.coeffs, m)
        _, dA = sp.diff(A.coeffs, m)
        Am = A.coeffs[m, : low.size]
        Bm = B.coeffs[m, : low.size]
        out = out + low.mul(Am[None], dB) - low.mul(Bm[None], dA)
    return TensorJet(low, out)


def constant_field(vec, dim: int, order: int) -> TensorJet:
    return TensorJet.constant(np.asarray(vec, dtype=float), dim, order)


def hertling_manin_intrinsic(c: TensorJet, X: TensorJet, Y: TensorJet,
                             Z: TensorJet, W: TensorJet) -> np.ndarray:
    """The nine-bracket coordinate-free form of the Hertling–Manin condition."""
    cv = c.value
    p = lambda a, b: product(a, b, cv)  # noqa: E731
    XY = circ(c, X, Y)
    ZW = circ(c, Z, W)
    x, y, z, w = X.value, Y.value, Z.value, W.value
    return (bracket(XY, ZW) - p(bracket(XY, Z), w) - p(bracket(XY, W), z)
            - p(x, bracket(Y, ZW)) + p(x, p(bracket(Y, Z), w)) + p(x, p(bracket(Y, W), z))
            - p(y, bracket(X, ZW)) + p(y, p(bracket(X, Z), w)) + p(y, p(bracket(X, W), z)))


# -- Nijenhuis and Haantjes ---------------------------------------------------

def nijenhuis_tensor(V: TensorJet) -> np.ndarray:
    """``N^i_{jk}`` so that ``N_V(X, Y)^i = N^i_{jk} X^j Y^k``."""
    v, dv = V.value, V.d1  # dv[i, k, m] = ∂_m V^i_k
    return (np.einsum("mj,ikm->ijk", v, dv) - np.einsum("mk,ijm->ijk", v, dv)
            - np.einsum("im,mkj->ijk", v, dv) + np.einsum("im,mjk->ijk", v, dv))


def _haantjes_terms(V: TensorJet):
    v = V.value
    N = nijenhuis_tensor(V)
    return (np.einsum("iab,aj,bk->ijk", N, v, v),
            -np.einsum("im,mjb,bk->ijk", v, N, v),
            -np.einsum("im,mak,aj->ijk", v, N, v),
            np.einsum("im,mjk->ijk", v @ v, N))


def haantjes_tensor(V: TensorJet) -> np.ndarray:
    return sum(_haantjes_terms(V))


def nijenhuis(V: TensorJet, X, Y) -> np.ndarray:
    return np.einsum("ijk,j,k->i", nijenhuis_tensor(V), X, Y)


def haantjes(V: TensorJet, X, Y) -> np.ndarray:
    return np.einsum("ijk,j,k->i", haantjes_tensor(V), X, Y)


def haantjes_residual(V: TensorJet) -> Residual:
    """All components of ``H_V`` on basis pairs, scaled by the size of its terms.

    Each Nijenhuis term is itself a sum of products; the scale uses the
    terms of ``N`` weighted by ``|V|²`` so that cancellation inside ``N``
    is accounted for.
    """
    v, dv = V.value, V.d1
    nterm = float(np.max(np.abs(np.einsum("mj,ikm->ijk", v, dv)))) if v.size else 0.0
    nterm = max(nterm, float(np.max(np.abs(np.einsum("im,mkj->ijk", v, dv)))))
    vmax = float(np.max(np.abs(v @ v)))
    H = _haantjes_terms(V)
    return Residual(float(np.max(np.abs(sum(H)))),
                    max(max(float(np.max(np.abs(t))) for t in H), nterm * max(vmax, 1e-300)))


def V_jet(c: TensorJet, Z: TensorJet) -> TensorJet:
    order = min(c.order, Z.order)
    c, Z = c.truncate(order), Z.truncate(order)
    sp = c.space
    return TensorJet(sp, sp.mul(c.coeffs, Z.coeffs[None, None]).sum(axis=2))


def nijenhuis_rewritten(c: TensorJet, X: TensorJet, Y: TensorJet, Z: TensorJet) -> np.ndarray:
    """Form of ``N_{V_Z}(X, Y)`` obtained from the Hertling–Manin identity.

    ``[X∘Z, Z]∘Y − [X, Z]∘Z∘Y + [Z, Y∘Z]∘X − [Z, Y]∘X∘Z``.
    """
    cv = c.value
    p = lambda a, b: product(a, b, cv)  # noqa: E731
    x, y, z = X.value, Y.value, Z.value
    return (p(bracket(circ(c, X, Z), Z), y) - p(p(bracket(X, Z), z), y)
            + p(bracket(Z, circ(c, Y, Z)), x) - p(p(bracket(Z, Y), x), z))


def nijenhuis_of_product(c: TensorJet, X: TensorJet, Y: TensorJet, Z: TensorJet) -> np.ndarray:
    """``[Z∘X, Z∘Y] + Z²∘[X, Y] − Z∘[X, Z∘Y] − Z∘[Z∘X, Y]`` for arbitrary fields."""
    cv = c.value
    p = lambda a, b: product(a, b, cv)  # noqa: E731
    z = Z.value
    ZX, ZY = circ(c, Z, X), circ(c, Z, Y)
    return (bracket(ZX, ZY) + p(p(z, z), bracket(X, Y))
            - p(z, bracket(X, ZY)) - p(z, bracket(ZX, Y)))


# -- canonical coordinates and unity ------------------------------------------

@dataclass(frozen=True)
class DiagonalCheck:
    f: np.ndarray            # sampled f_i, shape (points, n)
    pattern: Residual        # off-pattern components
    dependence: Residual     # ∂_j f_i for j != i
    worst: tuple             # (point index, component) of worst pattern violation
    passed: bool


def diagonal_structure_check(c_jets, tol_abs: float = 1e-9, tol_rel: float = 1e-9) -> DiagonalCheck:
    """Check ``c^i_{jk} = f_i δ^i_j δ^i_k`` and ``∂_j f_i = 0`` (j ≠ i) at each jet."""
    fs, pats, deps = [], [], []
    worst, worst_val = (), -1.0
    for p, c in enumerate(c_jets):
        n = c.space.dim
        diag = np.zeros_like(c.value)
        f = np.array([c.value[i, i, i] for i in range(n)])
        for i in range(n):
            diag[i, i, i] = f[i]
        off = c.value - diag
        k = np.unravel_index(np.argmax(np.abs(off)), off.shape)
        if abs(off[k]) > worst_val:
            worst_val, worst = float(abs(off[k])), (p, tuple(int(x) + 1 for x in k))
        pats.append(Residual.of(off, c.value))
        df = np.array([[c.d1[i, i, i, j] if j != i else 0.0 for j in range(n)] for i in range(n)])
        if np.all(f != 0):
            deps.append(Residual.of(df, c.d1))
        fs.append(f)
    pattern = Residual.combine(pats)
    dependence = Residual.combine(deps)
    passed = pattern.passes(tol_abs, tol_rel) and dependence.passes(tol_abs, tol_rel)
    return DiagonalCheck(np.array(fs), pattern, dependence, worst, passed)


def unity_field(f: np.ndarray) -> np.ndarray:
    """``e^i = 1/f_i`` from sampled diagonal entries (shape ``(points, n)``)."""
    f = np.asarray(f, dtype=float)
    if np.any(f == 0) or np.any(~np.isfinite(f)):
        bad = np.argwhere((f == 0) | ~np.isfinite(f))[0]
        raise EvaluationError(f"f_{bad[-1] + 1} vanishes; the unity is undefined there")
    return 1.0 / f


def unity_jet(c: TensorJet) -> TensorJet:
    """Jet of the unity field: the solution of ``c^i_{jk} e^k = δ^i_j``.

    Solved as a least-squares normal system at jet level; the residual of the
    exact equation is reported by :func:`unity_residual`.
    """
    sp = c.space
    n = sp.dim
    C = c.coeffs.reshape(n * n, n, sp.size)      # rows (i, j), columns k
    Ct = np.swapaxes(C, 0, 1)
    normal = sp.matmul(Ct, C)
    try:
        inv = sp.inverse_matrix(normal)
    except EvaluationError as exc:
        raise EvaluationError("the algebra has no unity (degenerate structure)") from exc
    rhs = sp.constant(np.eye(n).reshape(n * n, 1))
    e = sp.matmul(inv, sp.matmul(Ct, rhs))[:, 0]
    return TensorJet(sp, e)


def unity_residual(c: np.ndarray, e: np.ndarray) -> Residual:
    got = np.einsum("ijk,k->ij", c, e)
    return Residual.of(got - np.eye(c.shape[0]), got)


def lie_unity_residual(c: TensorJet, e: TensorJet) -> Residual:
    L = lie_derivative_c(e, c)
    return Residual.of(L, np.einsum("m,ijkm->ijk", e.value, c.d1),
                       np.einsum("mjk,im->ijk", c.value, e.d1))


def min_eigen_gap(V: np.ndarray) -> float:
    ev = np.linalg.eigvals(V)
    if ev.size < 2:
        return float("inf")
    gaps = np.abs(ev[:, None] - ev[None, :])
    gaps[np.diag_indices_from(gaps)] = np.inf
    return float(np.min(gaps))
