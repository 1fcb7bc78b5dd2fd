"""Timing comparison of the compiled and NumPy kernel backends.

Run with:  python3 benchmarks/bench_kernels.py [--size N] [--points M]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from hfsim.kernels import _ref

try:
    from hfsim.kernels import _fast
except ImportError:
    _fast = None


def _time(fn, *args, repeat: int = 5) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=512, help="grid side length")
    ap.add_argument("--points", type=int, default=500_000,
                    help="sample point count")
    args = ap.parse_args()

    rng = np.random.default_rng(42)
    n = args.size
    values = rng.standard_normal((n, n))
    coords = rng.uniform(0, n - 1, size=(args.points, 2))

    phi = rng.standard_normal((n, n))
    pos = phi > 0
    dtau_s = np.full((n, n), 0.5 / n) * np.sign(phi)
    update = np.abs(phi) < 1.0

    backends = [("ref", _ref)] + ([("fast", _fast)] if _fast else [])
    print(f"grid {n}x{n}, {args.points} sample points")
    print(f"{'kernel':20s}" + "".join(f"{name:>12s}" for name, _ in backends)
          + ("     speedup" if _fast else ""))

    for kname, call in (
        ("sample_multilinear",
         lambda m: m.sample_multilinear(values, coords)),
        ("reinit_godunov",
         lambda m: m.reinit_godunov(phi, pos, dtau_s, 1.0 / n, update)),
    ):
        times = [_time(call, mod) for _, mod in backends]
        row = f"{kname:20s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:10.1f}x"
        print(row)

    if _fast:
        a = _ref.sample_multilinear(values, coords)
        b = _fast.sample_multilinear(values, coords)
        print(f"max backend disagreement (sampling): {np.abs(a - b).max():.2e}")


if __name__ == "__main__":
    main()
