"""Truncated Laurent series in ``w = 1/p`` with jet-valued coefficients.

Used to expand a Lax function at ``p = ∞``.  A series stores the coefficients
of ``w^val, …, w^(val+L−1)``; everything from ``w^(val+L)`` on is unknown
(relative precision ``L``).  A separate coefficient tracks ``ln w`` terms,
which appear transiently when logarithms are expanded and must cancel.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .errors import EvaluationError
from .jets import Jet, JetSpace


class Laurent:
    is_laurent = True

    def __init__(self, space: JetSpace, val: int, coeffs: np.ndarray, log: np.ndarray | None = None):
        self.space = space
        self.val = int(val)
        self.c = np.asarray(coeffs, dtype=float)
        self.log = log

    # -- construction ---------------------------------------------------

    @classmethod
    def p(cls, space: JetSpace, terms: int) -> "Laurent":
        c = np.zeros((terms, space.size))
        c[0, 0] = 1.0
        return cls(space, -1, c)

    @classmethod
    def const(cls, x, space: JetSpace, terms: int) -> "Laurent":
        c = np.zeros((terms, space.size))
        if isinstance(x, Jet):
            c[0] = x.coeffs
        else:
            c[0, 0] = float(x)
        return cls(space, 0, c)

    @property
    def terms(self) -> int:
        return self.c.shape[0]

    @property
    def prec(self) -> int:
        """First power of ``w`` whose coefficient is unknown."""
        return self.val + self.terms

    def _lift(self, other) -> "Laurent":
        if isinstance(other, Laurent):
            return other
        if isinstance(other, (Jet, int, float, np.number)):
            return Laurent.const(other, self.space, self.terms)
        return NotImplemented

    def coefficient(self, power: int) -> np.ndarray:
        """Coefficient jet of ``w^power``."""
        if power >= self.prec:
            raise EvaluationError(f"coefficient of w^{power} is beyond the expansion precision")
        k = power - self.val
        return self.c[k] if k >= 0 else np.zeros(self.space.size)

    def trimmed(self) -> "Laurent":
        """Drop exactly vanishing leading coefficients."""
        k = 0
        while k < self.terms - 1 and not np.any(self.c[k]):
            k += 1
        return Laurent(self.space, self.val + k, self.c[k:], self.log)

    # -- ring operations --------------------------------------------------

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        v = min(self.val, other.val)
        prec = min(self.prec, other.prec)
        out = np.zeros((max(prec - v, 1), self.space.size))
        for s in (self, other):
            k = min(s.terms, prec - s.val)
            if k > 0:
                out[s.val - v: s.val - v + k] += s.c[:k]
        log = _add_opt(self.log, other.log)
        return Laurent(self.space, v, out, log)

    __radd__ = __add__

    def __neg__(self):
        return Laurent(self.space, self.val, -self.c, None if self.log is None else -self.log)

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def _is_constant(self) -> bool:
        return self.log is None and self.val == 0 and not np.any(self.c[1:])

    def __mul__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        sp = self.space
        log = None
        if self.log is not None or other.log is not None:
            if self.log is not None and other._is_constant():
                log = sp.mul(self.log, other.c[0])
            elif other.log is not None and self._is_constant():
                log = sp.mul(other.log, self.c[0])
            else:
                raise EvaluationError("a logarithmic term at p = ∞ is multiplied by a non-constant series")
        L = min(self.terms, other.terms)
        out = np.zeros((L, sp.size))
        for k in range(L):
            out[k] = sp.mul(self.c[: k + 1], other.c[k::-1]).sum(axis=0)
        return Laurent(sp, self.val + other.val, out, log)

    __rmul__ = __mul__

    def _shifted(self, k: int) -> "Laurent":
        return Laurent(self.space, self.val + k, self.c, self.log)

    def _normalized(self):
        """``self = w^val · a0 · (1 + t)``; returns ``(a0, inv_a0, t)``."""
        if self.log is not None:
            raise EvaluationError("cannot invert or take roots of a logarithmic series at p = ∞")
        s = self.trimmed()
        a0 = s.c[0]
        if a0[0] == 0.0:
            raise EvaluationError("leading coefficient at p = ∞ vanishes at the point")
        inv = s.space.reciprocal(a0)
        t = s.space.mul(s.c, inv)
        t[0] = 0.0
        return s, a0, inv, t

    def reciprocal(self) -> "Laurent":
        s, a0, inv, t = self._normalized()
        sp = self.space
        q = np.zeros_like(t)
        q[0] = sp.constant(1.0)
        for k in range(1, s.terms):
            q[k] = -sp.mul(t[1: k + 1], q[k - 1:: -1][:k]).sum(axis=0)
        return Laurent(sp, -s.val, sp.mul(q, inv), None)

    def __truediv__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return other * self.reciprocal()

    def power(self, r) -> "Laurent":
        r = Fraction(r)
        if r.denominator == 1 and r >= 0:
            out = Laurent.const(1.0, self.space, self.terms)
            for _ in range(int(r)):
                out = out * self
            return out
        if r.denominator == 1:
            return self.reciprocal().power(-r)
        s, a0, inv, t = self._normalized()
        shift = s.val * r
        if shift.denominator != 1:
            raise EvaluationError(f"power {r} of a series with a pole of order {-s.val} at p = ∞")
        sp = self.space
        q = np.zeros_like(t)
        q[0] = sp.constant(1.0)
        rf = float(r)
        for k in range(1, s.terms):
            j = np.arange(1, k + 1)
            w = ((rf + 1.0) * j - k)[:, None]
            q[k] = (w * sp.mul(t[1: k + 1], q[k - 1:: -1][:k])).sum(axis=0) / k
        lead = sp.power(a0, r)
        return Laurent(sp, int(shift), sp.mul(q, lead), None)

    __pow__ = power

    def apply(self, tag: str) -> "Laurent":
        sp = self.space
        if tag == "sqrt":
            return self.power(Fraction(1, 2))
        if tag == "ln":
            s, a0, inv, t = self._normalized()
            l = np.zeros_like(t)
            for k in range(1, s.terms):
                j = np.arange(1, k)
                acc = t[k].copy()
                if k > 1:
                    acc -= (j[:, None] * sp.mul(l[1:k], t[k - 1: 0: -1])).sum(axis=0) / k
                l[k] = acc
            l[0] = sp.apply("ln", a0)
            log = sp.constant(float(s.val)) if s.val else None
            return Laurent(sp, 0, l, log)
        if self.log is not None:
            # exp(m ln w + s) = w^m exp(s) for an integer constant m
            m = self.log
            if tag != "exp" or np.any(m[1:]) or abs(m[0] - round(m[0])) > 1e-12:
                raise EvaluationError(f"{tag} of a logarithmic series at p = ∞")
            return Laurent(sp, self.val, self.c, None).apply("exp")._shifted(int(round(m[0])))
        s = self.trimmed()
        if s.val < 0 and np.any(s.c[0]):
            raise EvaluationError(f"{tag} of a series with a pole at p = ∞")
        L = s.prec
        if L <= 0:
            raise EvaluationError("series precision exhausted")
        t = np.zeros((L, sp.size))
        lo = max(s.val, 0)
        t[lo:L] = s.c[lo - s.val: L - s.val]
        c0 = t[0].copy()
        t[0] = 0.0
        j_all = np.arange(1, L)
        if tag == "exp":
            e = np.zeros_like(t)
            e[0] = sp.apply("exp", c0)
            for k in range(1, L):
                j = j_all[:k]
                e[k] = (j[:, None] * sp.mul(t[1: k + 1], e[k - 1:: -1][:k])).sum(axis=0) / k
            return Laurent(sp, 0, e, None)
        if tag in ("sin", "cos"):
            S = np.zeros_like(t)
            C = np.zeros_like(t)
            S[0], C[0] = sp.apply("sin", c0), sp.apply("cos", c0)
            for k in range(1, L):
                j = j_all[:k][:, None]
                S[k] = (j * sp.mul(t[1: k + 1], C[k - 1:: -1][:k])).sum(axis=0) / k
                C[k] = -(j * sp.mul(t[1: k + 1], S[k - 1:: -1][:k])).sum(axis=0) / k
            return Laurent(sp, 0, S if tag == "sin" else C, None)
        raise ValueError(f"unknown elementary function {tag!r}")


def _add_opt(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b
