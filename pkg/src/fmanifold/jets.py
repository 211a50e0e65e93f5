"""Truncated multivariate Taylor arithmetic.

A jet of order D in ``dim`` variables stores, for every multi-index ``a`` with
``|a| <= D``, the Taylor coefficient ``d^a f / a!`` at some (implicit) base
point.  Coefficients live on the last axis of a numpy array, so a single
:class:`Jet` may carry a whole batch or tensor of jets; all operations
broadcast over the leading axes.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Sequence

import numpy as np

from .errors import EvaluationError


def _multi_indices(dim: int, order: int) -> list[tuple[int, ...]]:
    out: list[tuple[int, ...]] = []
    for d in range(order + 1):
        block = []
        for combo in combinations_with_replacement(range(dim), d):
            a = [0] * dim
            for v in combo:
                a[v] += 1
            block.append(tuple(a))
        # graded lex: within a degree, larger leading exponents first
        block.sort(reverse=True)
        out.extend(block)
    return out


class JetSpace:
    """Index tables for jets with fixed ``(dim, order)``.

    Instances are shared; obtain them through :meth:`JetSpace.get`.
    """

    def __init__(self, dim: int, order: int):
        if dim < 0 or order < 0:
            raise ValueError("dim and order must be non-negative")
        self.dim = dim
        self.order = order
        self.indices = _multi_indices(dim, order)
        self.size = len(self.indices)
        self.position = {a: k for k, a in enumerate(self.indices)}
        self.degrees = np.array([sum(a) for a in self.indices], dtype=int)
        self.factorials = np.array(
            [math.prod(math.factorial(e) for e in a) for a in self.indices], dtype=float
        )
        self._mul_tables: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    @staticmethod
    @lru_cache(maxsize=None)
    def get(dim: int, order: int) -> "JetSpace":
        return JetSpace(dim, order)

    def __repr__(self) -> str:
        return f"JetSpace(dim={self.dim}, order={self.order})"

    # -- products -------------------------------------------------------

    def _tables(self):
        if self._mul_tables is None:
            ia, ib, ic = [], [], []
            for i, a in enumerate(self.indices):
                da = sum(a)
                for j, b in enumerate(self.indices):
                    if da + sum(b) > self.order:
                        continue
                    c = tuple(x + y for x, y in zip(a, b))
                    ia.append(i)
                    ib.append(j)
                    ic.append(self.position[c])
            ia, ib, ic = np.array(ia), np.array(ib), np.array(ic)
            perm = np.argsort(ic, kind="stable")
            ia, ib, ic = ia[perm], ib[perm], ic[perm]
            starts = np.searchsorted(ic, np.arange(self.size))
            self._mul_tables = (ia, ib, starts)
        return self._mul_tables

    def mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Truncated product of coefficient arrays (broadcast on leading axes)."""
        ia, ib, starts = self._tables()
        prod = a[..., ia] * b[..., ib]
        return np.add.reduceat(prod, starts, axis=-1)

    def matmul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Matrix product of jet-valued matrices ``(..., n, m, N) @ (..., m, k, N)``."""
        return self.mul(a[..., :, :, None, :], b[..., None, :, :, :]).sum(axis=-3)

    def constant(self, value) -> np.ndarray:
        value = np.asarray(value, dtype=float)
        out = np.zeros(value.shape + (self.size,))
        out[..., 0] = value
        return out

    def variable(self, i: int, x0: Sequence[float]) -> np.ndarray:
        if not 0 <= i < self.dim:
            raise IndexError(f"variable index {i} out of range for dim {self.dim}")
        out = np.zeros(self.size)
        out[0] = x0[i]
        if self.order >= 1:
            e = [0] * self.dim
            e[i] = 1
            out[self.position[tuple(e)]] = 1.0
        return out

    # -- univariate composition ----------------------------------------

    def compose_taylor(self, a: np.ndarray, taylor: np.ndarray) -> np.ndarray:
        """Return ``sum_k taylor[..., k] * (a - a0)^k`` truncated to ``order``.

        ``taylor[..., k]`` are the Taylor coefficients ``f^(k)(a0)/k!`` of a
        univariate function about the value ``a0 = a[..., 0]``.
        """
        delta = np.array(a, dtype=float, copy=True)
        delta[..., 0] = 0.0
        out = self.constant(taylor[..., self.order])
        for k in range(self.order - 1, -1, -1):
            out = self.mul(out, delta)
            out[..., 0] += taylor[..., k]
        return out

    def reciprocal(self, a: np.ndarray) -> np.ndarray:
        a0 = a[..., 0]
        if np.any(a0 == 0.0):
            raise EvaluationError("division by a jet with zero value")
        k = np.arange(self.order + 1)
        taylor = (-1.0) ** k * a0[..., None] ** (-(k + 1.0))
        return self.compose_taylor(a, taylor)

    def power(self, a: np.ndarray, r: Fraction | int) -> np.ndarray:
        r = Fraction(r)
        if r.denominator == 1 and r >= 0:
            n = int(r)
            out = self.constant(np.ones(a.shape[:-1]))
            base = a
            while n:
                if n & 1:
                    out = self.mul(out, base)
                n >>= 1
                if n:
                    base = self.mul(base, base)
            return out
        a0 = a[..., 0]
        if r.denominator == 1:
            if np.any(a0 == 0.0):
                raise EvaluationError(f"negative power {r} of a jet with zero value")
        elif np.any(a0 <= 0.0):
            raise EvaluationError(f"non-integer power {r} of a non-positive value")
        rf = float(r)
        taylor = np.empty(a0.shape + (self.order + 1,))
        binom = 1.0
        for k in range(self.order + 1):
            taylor[..., k] = binom * np.power(a0, rf - k)
            binom *= (rf - k) / (k + 1)
        return self.compose_taylor(a, taylor)

    def apply(self, tag: str, a: np.ndarray) -> np.ndarray:
        a0 = a[..., 0]
        k = np.arange(self.order + 1)
        fact = np.array([math.factorial(int(i)) for i in k], dtype=float)
        if tag == "exp":
            taylor = np.exp(a0)[..., None] / fact
        elif tag == "ln":
            if np.any(a0 <= 0.0):
                raise EvaluationError("ln of a non-positive value")
            kk = np.maximum(k, 1)
            taylor = (-1.0) ** (k + 1) / (kk * a0[..., None] ** kk)
            taylor[..., 0] = np.log(a0)
        elif tag == "sqrt":
            return self.power(a, Fraction(1, 2))
        elif tag == "sin":
            taylor = np.sin(a0[..., None] + k * np.pi / 2) / fact
        elif tag == "cos":
            taylor = np.cos(a0[..., None] + k * np.pi / 2) / fact
        else:
            raise ValueError(f"unknown elementary function {tag!r}")
        return self.compose_taylor(a, taylor)

    # -- derivatives, restriction, change of space ------------------------

    @lru_cache(maxsize=None)
    def _diff_map(self, var: int):
        target = JetSpace.get(self.dim, self.order - 1)
        src = np.empty(target.size, dtype=int)
        fac = np.empty(target.size)
        for k, b in enumerate(target.indices):
            up = list(b)
            up[var] += 1
            src[k] = self.position[tuple(up)]
            fac[k] = up[var]
        return target, src, fac

    def diff(self, a: np.ndarray, var: int) -> tuple["JetSpace", np.ndarray]:
        """Partial derivative in ``var``; the result has order ``order - 1``."""
        if self.order == 0:
            raise EvaluationError("cannot differentiate an order-0 jet")
        target, src, fac = self._diff_map(var)
        return target, a[..., src] * fac

    def derivative(self, a: np.ndarray, multi_index: Sequence[int]) -> np.ndarray:
        """Value of the partial derivative ``d^multi_index`` at the base point."""
        key = tuple(int(m) for m in multi_index)
        if len(key) != self.dim:
            raise IndexError("multi-index length does not match dim")
        if sum(key) > self.order:
            raise EvaluationError(f"derivative order {sum(key)} exceeds jet order {self.order}")
        k = self.position[key]
        return a[..., k] * self.factorials[k]

    def gradient(self, a: np.ndarray) -> np.ndarray:
        """First derivatives, appended as a trailing axis of length ``dim``."""
        pos = [self.position[tuple(int(i == j) for i in range(self.dim))] for j in range(self.dim)]
        return a[..., pos]

    def hessian(self, a: np.ndarray) -> np.ndarray:
        n = self.dim
        pos = np.empty((n, n), dtype=int)
        fac = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                e = [0] * n
                e[i] += 1
                e[j] += 1
                pos[i, j] = self.position[tuple(e)]
                fac[i, j] = 2.0 if i == j else 1.0
        return a[..., pos] * fac

    @lru_cache(maxsize=None)
    def _embed_map(self, target: "JetSpace", var_map: tuple[int, ...]):
        src, dst = [], []
        for k, a in enumerate(self.indices):
            if sum(a) > target.order:
                continue
            b = [0] * target.dim
            for j, e in enumerate(a):
                b[var_map[j]] += e
            src.append(k)
            dst.append(target.position[tuple(b)])
        return np.array(src, dtype=int), np.array(dst, dtype=int)

    def embed(self, a: np.ndarray, target: "JetSpace", var_map: Sequence[int] | None = None) -> np.ndarray:
        """Re-express a jet in ``target``, variable ``j`` becoming ``var_map[j]``.

        Terms above ``target.order`` are dropped; target monomials that involve
        variables outside ``var_map`` get zero coefficients.
        """
        if var_map is None:
            var_map = tuple(range(self.dim))
        src, dst = self._embed_map(target, tuple(var_map))
        out = np.zeros(a.shape[:-1] + (target.size,))
        out[..., dst] = a[..., src]
        return out

    @lru_cache(maxsize=None)
    def _restrict_map(self, keep: tuple[int, ...]):
        target = JetSpace.get(len(keep), self.order)
        dropped = [j for j in range(self.dim) if j not in keep]
        src, dst = [], []
        for k, a in enumerate(self.indices):
            if any(a[j] for j in dropped):
                continue
            src.append(k)
            dst.append(target.position[tuple(a[j] for j in keep)])
        return target, np.array(src, dtype=int), np.array(dst, dtype=int)

    def restrict(self, a: np.ndarray, keep: Sequence[int]) -> tuple["JetSpace", np.ndarray]:
        """Set every variable not in ``keep`` to its base value."""
        target, src, dst = self._restrict_map(tuple(keep))
        out = np.zeros(a.shape[:-1] + (target.size,))
        out[..., dst] = a[..., src]
        return target, out

    def compose(self, a: np.ndarray, inner: Sequence[np.ndarray], base: Sequence[float],
                target: "JetSpace") -> np.ndarray:
        """Substitute jets for the variables of the Taylor polynomial ``a``.

        ``a`` is the expansion of some function about ``base``; ``inner[j]`` is a
        jet in ``target`` for the j-th argument.  When every ``inner[j]`` has
        value ``base[j]`` the result is the jet of the composition; otherwise
        the polynomial is re-expanded exactly.
        """
        if len(inner) != self.dim:
            raise ValueError("need one inner jet per variable")
        deltas = []
        centred = True
        for j in range(self.dim):
            d = np.array(inner[j], dtype=float, copy=True)
            d[..., 0] -= base[j]
            if np.any(d[..., 0] != 0.0):
                centred = False
            deltas.append(d)
        lead = np.broadcast_shapes(a.shape[:-1], *(d.shape[:-1] for d in deltas))
        top = min(self.order, target.order) if centred else self.order
        powers = []
        for d in deltas:
            p = [target.constant(np.ones(d.shape[:-1]))]
            for _ in range(top):
                p.append(target.mul(p[-1], d))
            powers.append(p)
        out = np.zeros(lead + (target.size,))
        for k, alpha in enumerate(self.indices):
            if sum(alpha) > top:
                break
            coeff = a[..., k]
            if not np.any(coeff):
                continue
            term = None
            for j, e in enumerate(alpha):
                if e:
                    term = powers[j][e] if term is None else target.mul(term, powers[j][e])
            if term is None:
                out[..., 0] += coeff
            else:
                out = out + coeff[..., None] * term
        return out

    def inverse_matrix(self, m: np.ndarray) -> np.ndarray:
        """Inverse of a jet-valued square matrix ``(..., n, n, N)``."""
        m0 = m[..., 0]
        try:
            inv0 = np.linalg.inv(m0)
        except np.linalg.LinAlgError as exc:
            raise EvaluationError("singular matrix") from exc
        if not np.all(np.isfinite(inv0)):
            raise EvaluationError("singular matrix")
        delta = np.array(m, copy=True)
        delta[..., 0] = 0.0
        inv0j = self.constant(inv0)
        step = -self.matmul(inv0j, delta)
        out = inv0j
        power = inv0j
        for _ in range(self.order):
            power = self.matmul(step, power)
            out = out + power
        return out


class Jet:
    """Immutable jet (or batch of jets) with arithmetic operators."""

    __slots__ = ("space", "coeffs")

    def __init__(self, space: JetSpace, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[-1:] != (space.size,):
            raise ValueError(f"coefficient array does not fit {space!r}")
        coeffs.setflags(write=False)
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "coeffs", coeffs)

    def __setattr__(self, name, value):
        raise AttributeError("Jet is immutable")

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def order(self) -> int:
        return self.space.order

    @property
    def value(self):
        return self.coeffs[..., 0]

    def __repr__(self) -> str:
        return f"Jet(dim={self.dim}, order={self.order}, value={self.value!r})"

    @staticmethod
    def _foreign(other) -> bool:
        return not isinstance(other, (Jet, int, float, np.ndarray, np.number))

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, Jet):
            if other.space is not self.space:
                raise ValueError(f"jet spaces differ: {self.space!r} vs {other.space!r}")
            return other.coeffs
        return self.space.constant(other)

    def __add__(self, other):
        if self._foreign(other):
            return NotImplemented
        if not isinstance(other, Jet):
            out = np.array(self.coeffs, copy=True)
            out[..., 0] = out[..., 0] + other
            return Jet(self.space, out)
        return Jet(self.space, self.coeffs + self._coerce(other))

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.space, -self.coeffs)

    def __sub__(self, other):
        if self._foreign(other):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if self._foreign(other):
            return NotImplemented
        if not isinstance(other, Jet):
            return Jet(self.space, self.coeffs * np.asarray(other, dtype=float)[..., None])
        return Jet(self.space, self.space.mul(self.coeffs, other.coeffs))

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        return Jet(self.space, self.space.reciprocal(self.coeffs))

    def __truediv__(self, other):
        if self._foreign(other):
            return NotImplemented
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            if np.any(other == 0.0):
                raise EvaluationError("division by zero")
            return Jet(self.space, self.coeffs / other[..., None])
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        if self._foreign(other):
            return NotImplemented
        return self.reciprocal() * other

    def __pow__(self, r):
        return Jet(self.space, self.space.power(self.coeffs, Fraction(r)))

    power = __pow__

    def apply(self, tag: str) -> "Jet":
        return jet_apply(tag, self)

    def diff(self, var: int) -> "Jet":
        space, coeffs = self.space.diff(self.coeffs, var)
        return Jet(space, coeffs)

    def extract(self, multi_index: Sequence[int]):
        return jet_extract(self, multi_index)

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise ValueError("cannot raise the order of a jet")
        target = JetSpace.get(self.dim, order)
        return Jet(target, self.coeffs[..., : target.size])


def jet_var(i: int, x0: Sequence[float], dim: int, order: int) -> Jet:
    """Jet of the coordinate function ``x^i`` at ``x0``."""
    if not 0 <= i < dim:
        raise IndexError(f"coordinate index {i} out of range for dim {dim}")
    space = JetSpace.get(dim, order)
    return Jet(space, space.variable(i, x0))


def jet_const(value, dim: int, order: int) -> Jet:
    space = JetSpace.get(dim, order)
    return Jet(space, space.constant(value))


def jet_apply(tag: str, a: Jet, exponent: Fraction | int | None = None) -> Jet:
    """Jet of ``f(a)`` for an elementary function tag.

    Supported tags: ``exp``, ``ln``, ``sqrt``, ``sin``, ``cos`` and ``pow``
    (which needs a rational ``exponent``).
    """
    if tag == "pow":
        if exponent is None:
            raise ValueError("pow needs an exponent")
        return Jet(a.space, a.space.power(a.coeffs, Fraction(exponent)))
    return Jet(a.space, a.space.apply(tag, a.coeffs))


def jet_extract(a: Jet, multi_index: Sequence[int]):
    """Partial derivative ``d^multi_index`` (coefficient times ``multi_index!``)."""
    return a.space.derivative(a.coeffs, multi_index)
