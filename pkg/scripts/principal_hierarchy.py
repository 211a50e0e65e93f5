#!/usr/bin/env python3
"""Build the principal hierarchy of the two-dimensional Frobenius fixture and print its series.

Usage: python scripts/principal_hierarchy.py [--alpha-max N] [--order K]
"""

from __future__ import annotations

import argparse

import numpy as np

from fmanifold import hierarchy
from fmanifold.specio import load_fixture


def polynomial(field, coords) -> list[str]:
    """Human-readable components of a series vector field."""
    out = []
    for i in range(field.coeffs.shape[0]):
        terms = []
        for k, a in enumerate(field.space.indices):
            v = field.coeffs[i, k]
            if v == 0.0:
                continue
            mono = "*".join(f"{x}^{e}" if e > 1 else x for x, e in zip(coords, a) if e)
            terms.append(f"{v:g}" + (f"*{mono}" if mono else ""))
        out.append(" + ".join(terms) or "0")
    return out


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha-max", type=int, default=3)
    ap.add_argument("--order", type=int, default=8)
    args = ap.parse_args()
    spec = load_fixture("dkdv-frobenius").manifold
    h = hierarchy.build_hierarchy(spec, alpha_max=args.alpha_max, K=args.order)
    print(f"base point {h.base}, truncation order {h.K}")
    for label in h.labels():
        print(f"X{label} = ({', '.join(polynomial(h.fields[label], spec.coords))})")
    pts = spec.sample(np.random.default_rng(0), 8)
    pairs = hierarchy.pairwise_cc2(h, spec, pts)
    worst = max(r.value for r in pairs.values())
    print(f"{len(pairs)} pairs of flows, worst commutativity residual {worst:.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
