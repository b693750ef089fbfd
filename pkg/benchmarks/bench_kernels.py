"""Compare the numba and numpy stencil kernels.

Times residual evaluation and local Jacobian assembly on helicoid fields of
increasing size, for every PDE kind, and checks that both backends agree.

    python benchmarks/bench_kernels.py [--repeat 5] [--shapes 65x33 129x65]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from spacelike import kernels
from spacelike._accel import HAVE_NUMBA
from spacelike.expr import parse
from spacelike.grid import StructuredGrid, sample

KINDS = {
    "minimal": kernels.MINIMAL_EUCLIDEAN,
    "maximal": kernels.MAXIMAL_LORENTZIAN,
    "equal": kernels.EQUAL_CURVATURE,
}


def parse_shape(text: str) -> tuple[int, int]:
    a, b = text.lower().split("x")
    return int(a), int(b)


def best_time(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--shapes", nargs="+", default=["65x33", "129x65", "257x129"])
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return 1

    helicoid = parse("atan2(x2, x1)", 2)
    t = kernels.stencil_tables(2)
    print(f"{'shape':>9} {'kind':>8} {'op':>9} {'numpy ms':>10} {'numba ms':>10} "
          f"{'speedup':>8} {'max diff':>9}")
    for text in args.shapes:
        shape = parse_shape(text)
        field = sample(helicoid, StructuredGrid((1.5, -1.0), (4.0, 1.0), shape))
        S = field.stencil_values()
        h = field.grid.spacing
        for name, kind in KINDS.items():
            ops = {
                "residual": lambda b: kernels.stencil_residual(S, t, h, kind, b),
                "jacobian": lambda b: kernels.stencil_jacobian(S, t, h, kind, 1e-7, b),
            }
            for op, fn in ops.items():
                fn("numba")  # compile outside the timed region
                diff = float(np.max(np.abs(fn("numba") - fn("numpy"))))
                t_np = best_time(lambda: fn("numpy"), args.repeat)
                t_nb = best_time(lambda: fn("numba"), args.repeat)
                print(f"{text:>9} {name:>8} {op:>9} {1e3 * t_np:10.3f} {1e3 * t_nb:10.3f} "
                      f"{t_np / t_nb:8.1f} {diff:9.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
