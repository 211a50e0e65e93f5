#!/usr/bin/env python3
"""Run ``fman check --suite all`` on every shipped fixture and print a verdict table.

Usage: python scripts/run_all_fixtures.py [--out DIR] [--seed N] [--samples N]
"""

from __future__ import annotations

import argparse
import contextlib
import io
import json
import time
from pathlib import Path

from fmanifold.cli import main
from fmanifold.specio import fixture_names


def run(name: str, out_dir: Path, seed: int, samples: int) -> tuple[int, dict, float]:
    path = out_dir / f"{name}.json"
    start = time.perf_counter()
    with contextlib.redirect_stdout(io.StringIO()):
        status = main(["check", "--fixture", name, "--suite", "all", "--seed", str(seed),
                       "--samples", str(samples), "--out", str(path), "--json"])
    return status, json.loads(path.read_text(encoding="utf-8")), time.perf_counter() - start


def main_() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="reports", help="directory for the JSON reports (default: reports)")
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--samples", type=int, default=32)
    args = ap.parse_args()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    print(f"{'fixture':<18} {'exit':>4} {'verdict':>7} {'pass':>5} {'fail':>5} {'info':>5} {'skip':>5} {'time':>7}")
    for name in fixture_names():
        status, doc, dt = run(name, out_dir, args.seed, args.samples)
        s = doc["summary"]
        print(f"{name:<18} {status:>4} {doc['verdict']:>7} {s['pass']:>5} {s['fail']:>5} {s['info']:>5} "
              f"{s['skip']:>5} {dt:>6.1f}s")
        for c in doc["checks"]:
            if c["verdict"] == "fail":
                print(f"    fail  {c['name']}  max {c['max_residual']}")
    print(f"reports written to {out_dir}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main_())
