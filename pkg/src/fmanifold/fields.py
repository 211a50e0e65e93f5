"""Tensor fields on a single chart, evaluated as jets at a point."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import EvaluationError
from .expr import FieldExpr, evaluate, is_zero, parse
from .jets import Jet, JetSpace


@dataclass(frozen=True)
class TensorJet:
    """Jets of all components of a tensor at one point.

    ``coeffs`` has shape ``shape + (space.size,)``; derivative axes are
    appended after the component axes.
    """

    space: JetSpace
    coeffs: np.ndarray

    @property
    def shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[:-1]

    @property
    def order(self) -> int:
        return self.space.order

    @property
    def value(self) -> np.ndarray:
        return self.coeffs[..., 0]

    @property
    def d1(self) -> np.ndarray:
        return self.space.gradient(self.coeffs)

    @property
    def d2(self) -> np.ndarray:
        return self.space.hessian(self.coeffs)

    def component(self, *idx) -> Jet:
        return Jet(self.space, self.coeffs[idx])

    def truncate(self, order: int) -> "TensorJet":
        if order > self.order:
            raise ValueError(f"jet of order {self.order} cannot supply order {order}")
        target = JetSpace.get(self.space.dim, order)
        return TensorJet(target, self.coeffs[..., : target.size])

    def __add__(self, other: "TensorJet") -> "TensorJet":
        order = min(self.order, other.order)
        a, b = self.truncate(order), other.truncate(order)
        return TensorJet(a.space, a.coeffs + b.coeffs)

    def scaled(self, z: float) -> "TensorJet":
        return TensorJet(self.space, z * self.coeffs)

    @staticmethod
    def stack(jets: Sequence[Jet], shape: tuple[int, ...]) -> "TensorJet":
        space = jets[0].space
        coeffs = np.stack([j.coeffs for j in jets]).reshape(shape + (space.size,))
        return TensorJet(space, coeffs)

    @staticmethod
    def constant(values, dim: int, order: int) -> "TensorJet":
        space = JetSpace.get(dim, order)
        return TensorJet(space, space.constant(values))


class TensorField:
    """Anything that can produce component jets at a point."""

    shape: tuple[int, ...] = ()

    def jet(self, x0: Sequence[float], order: int) -> TensorJet:
        raise NotImplementedError


class ExprTensor(TensorField):
    """Tensor whose components are field expressions (``None`` means zero)."""

    def __init__(self, exprs: np.ndarray, chart: Sequence[str],
                 params: Mapping[str, float] | None = None):
        self.exprs = np.asarray(exprs, dtype=object)
        self.shape = self.exprs.shape
        self.chart = tuple(chart)
        self.params = dict(params or {})
        self._nonzero = [
            (idx, e) for idx, e in np.ndenumerate(self.exprs)
            if e is not None and not is_zero(e)
        ]

    @classmethod
    def from_strings(cls, table, chart: Sequence[str], params: Mapping[str, float] | None = None):
        table = np.asarray(table, dtype=object)
        exprs = np.empty(table.shape, dtype=object)
        for idx, src in np.ndenumerate(table):
            exprs[idx] = None if src is None else parse(str(src), chart, params=tuple(params or ()))
        return cls(exprs, chart, params)

    def jet(self, x0, order):
        n = len(self.chart)
        space = JetSpace.get(n, order)
        env: dict[str, object] = {
            name: Jet(space, space.variable(i, x0)) for i, name in enumerate(self.chart)
        }
        env.update(self.params)
        coeffs = np.zeros(self.shape + (space.size,))
        for idx, e in self._nonzero:
            try:
                val = evaluate(e.root, env)
            except EvaluationError as exc:
                raise exc.at(point=x0) from None
            if isinstance(val, Jet):
                coeffs[idx] = val.coeffs
            else:
                coeffs[idx][0] = val
        return TensorJet(space, coeffs)

    def component_source(self, *idx) -> str | None:
        e = self.exprs[idx]
        return None if e is None else str(e)


class ConstantTensor(TensorField):
    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)
        self.shape = self.values.shape

    def jet(self, x0, order):
        return TensorJet.constant(self.values, len(x0), order)


class CallableTensor(TensorField):
    """Wrap ``f(x0, order) -> TensorJet`` as a field."""

    def __init__(self, func, shape: tuple[int, ...]):
        self.func = func
        self.shape = shape

    def jet(self, x0, order):
        return self.func(x0, order)


@dataclass(frozen=True)
class Residual:
    """Maximal absolute residual of an identity and the size of its terms."""

    value: float
    scale: float

    def passes(self, tol_abs: float = 1e-9, tol_rel: float = 1e-9) -> bool:
        return bool(self.value <= tol_abs + tol_rel * self.scale)

    @staticmethod
    def of(residual, *terms) -> "Residual":
        residual = np.asarray(residual, dtype=float)
        value = float(np.max(np.abs(residual))) if residual.size else 0.0
        scale = 0.0
        for t in terms:
            t = np.asarray(t, dtype=float)
            if t.size:
                scale = max(scale, float(np.max(np.abs(t))))
        return Residual(value, scale)

    @staticmethod
    def combine(items: Sequence["Residual"]) -> "Residual":
        if not items:
            return Residual(0.0, 0.0)
        return Residual(max(r.value for r in items), max(r.scale for r in items))


def as_tensor_jet(field, x0, order: int) -> TensorJet:
    if isinstance(field, TensorJet):
        return field.truncate(order) if field.order > order else field
    return field.jet(x0, order)
