#!/usr/bin/env python3
"""Tour of the Benney reductions: closed forms, residue metrics and curvature.

Usage: python scripts/reduction_tour.py
"""

from __future__ import annotations

import math

import numpy as np

from fmanifold import benney, geometry
from fmanifold.specio import load_fixture


def zakharov() -> None:
    spec = load_fixture("zakharov-2")
    u = (0.3, 0.1)
    ch = benney.reduce(spec.lax, u, 3)
    s = math.sqrt(u[0])
    print(f"zakharov-2 at u = {u}")
    print(f"  velocities      {ch.v}   closed form {[u[1] - s, u[1] + s]}")
    print(f"  Riemann inv.    {ch.r}   closed form {[u[1] - 2 * s, u[1] + 2 * s]}")
    g = benney.residue_pairing(ch).g.value
    print(f"  residue metric  diag({g[0, 0]:.6f}, {g[1, 1]:.6f})   closed form ±(r2 − r1)/8 = {(ch.r[1] - ch.r[0]) / 8:.6f}")
    print(f"  λ_pp(v^i) ∂_i A⁰ = {ch.lam_pp * ch.moments_r(0).d1[0]}")


def curvature() -> None:
    print("curvature of the residue metric (max |R| over 8 sample points)")
    for name in ("zakharov-2", "log-3", "power-2", "power-3"):
        geo = load_fixture(name).geometry()
        R = max(float(np.max(np.abs(geometry.riemann_curvature(geo.gamma(x, 1)))))
                for x in geo.sample(np.random.default_rng(0), 8))
        print(f"  {name:<11} {R:.3e}")


if __name__ == "__main__":
    zakharov()
    curvature()
