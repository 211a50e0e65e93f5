"""The manifold description shared by every check: chart, product, metric, connection."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .fields import TensorField, TensorJet
from .geometry import christoffel_from_metric

SAMPLER = "numpy.random.default_rng (PCG64)"


@dataclass
class ManifoldSpec:
    """Chart data of an F-manifold candidate.

    ``connection`` takes precedence; otherwise the Levi-Civita connection of
    ``metric`` is used; with neither, no connection is available.
    """

    name: str
    coords: tuple[str, ...]
    structure: TensorField
    box: np.ndarray
    metric: TensorField | None = None
    connection: TensorField | None = None
    vector_fields: dict[str, TensorField] = field(default_factory=dict)
    canonical: bool = False
    base_point: tuple[float, ...] | None = None
    witness: tuple[float, ...] | None = None
    lax: Any = None
    params: Mapping[str, float] = field(default_factory=dict)
    description: str = ""

    def __post_init__(self):
        self.coords = tuple(self.coords)
        self.box = np.asarray(self.box, dtype=float).reshape(len(self.coords), 2)
        self._cache: dict = {}

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def has_connection(self) -> bool:
        return self.connection is not None or self.metric is not None

    def _cached(self, key, build):
        hit = self._cache.get(key)
        if hit is None or hit.order < key[2]:
            hit = build()
            self._cache[key] = hit
        return hit.truncate(key[2]) if hit.order > key[2] else hit

    def c(self, x0, order: int) -> TensorJet:
        x0 = tuple(float(v) for v in x0)
        return self._cached(("c", x0, order), lambda: self.structure.jet(x0, order))

    def g(self, x0, order: int) -> TensorJet | None:
        if self.metric is None:
            return None
        x0 = tuple(float(v) for v in x0)
        return self._cached(("g", x0, order), lambda: self.metric.jet(x0, order))

    def gamma(self, x0, order: int) -> TensorJet | None:
        x0 = tuple(float(v) for v in x0)
        if self.connection is not None:
            return self._cached(("G", x0, order), lambda: self.connection.jet(x0, order))
        if self.metric is not None:
            return self._cached(("G", x0, order),
                                lambda: christoffel_from_metric(self.g(x0, order + 1)))
        return None

    def field(self, name: str) -> TensorField:
        return self.vector_fields[name]

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        lo, hi = self.box[:, 0], self.box[:, 1]
        return lo + (hi - lo) * rng.random((count, self.n))

    def center(self) -> np.ndarray:
        return self.box.mean(axis=1)
