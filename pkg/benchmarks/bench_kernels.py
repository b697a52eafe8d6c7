"""Compare the compiled payoff kernel with the numpy fallback.

Run ``python3 benchmarks/bench_kernels.py``; prints a CSV table with the
best-of-``repeat`` wall time per call, the speedup, and the largest
difference between the two backends relative to the envelope
``pi/sqrt2 cosh(u/2)``.
"""

from __future__ import annotations

import argparse
import math
import sys
import timeit

import numpy as np

from sabrlab import _kernels_py, kernels

try:
    from sabrlab import _kernels as _compiled
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None

CASES = [
    # (label, sigma0, u grid, unit kernel)
    ("unit_small_u", 1.0, np.linspace(0.05, 3.0, 64), True),
    ("sabr_0.5", 0.5, np.linspace(0.05, 6.0, 64), False),
    ("sabr_10", 10.0, np.linspace(0.05, 6.0, 64), False),
    ("sabr_100_oscillating", 100.0, np.linspace(0.05, 6.0, 64), False),
]


def time_call(fn, repeat: int) -> float:
    fn()  # warm up caches and lazy imports
    number = max(1, int(0.2 / max(timeit.timeit(fn, number=1), 1e-6)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--refine", type=int, default=1)
    args = ap.parse_args(argv)
    if _compiled is None:
        print("compiled extension not built; nothing to compare", file=sys.stderr)
        return 1
    print("case,sigma0,points,compiled_s,numpy_s,speedup,max_rel_envelope_diff")
    for label, s, u, unit in CASES:
        def call(be):
            return lambda: kernels.g_values(u, s, 0.0, unit, refine=args.refine, backend=be)

        tc = time_call(call(_compiled), args.repeat)
        tp = time_call(call(_kernels_py), args.repeat)
        diff = np.abs(call(_compiled)() - call(_kernels_py)()) / (math.pi / math.sqrt(2) * np.cosh(u / 2))
        print(f"{label},{s},{len(u)},{tc:.3e},{tp:.3e},{tp / tc:.1f},{diff.max():.1e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
