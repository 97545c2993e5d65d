"""Time the numba and numpy assembly kernels against each other.

    python3 benchmarks/bench_kernels.py [--sizes 64,128,256] [--repeat 5]

Prints one line per (grid, fields, kernel) with the best-of-``repeat`` time
and the max relative difference between the two implementations.
"""
import argparse
import timeit

import numpy as np

from bifirom import kernels
from bifirom._accel import HAVE_NUMBA
from bifirom.fem import StructuredGrid, fem_space


def _inputs(n, nf, rng):
    space = fem_space(StructuredGrid(n, n), nf)
    ne = space.grid.n_elements
    dx = rng.uniform(0.5, 2.0, (nf, ne, 4))
    dy = rng.uniform(0.5, 2.0, (nf, ne, 4))
    react = rng.uniform(-1.0, 1.0, (nf, nf, ne, 4))
    src = rng.standard_normal((nf, ne, 4))
    return space, dx, dy, react, src


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="64,128,256")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    if not HAVE_NUMBA:
        print("numba not installed; only the numpy kernels are timed")
    print(f"{'grid':>8} {'fields':>6} {'kernel':>8} {'numpy [ms]':>11} {'numba [ms]':>11} {'ratio':>6} {'max rel diff':>13}")
    for n in (int(s) for s in args.sizes.split(",")):
        for nf in (1, 2):
            space, dx, dy, react, src = _inputs(n, nf, rng)
            cases = {
                "values": (
                    (dx, dy, react, space.bx, space.by, space.bm, space.scatter, space.nnz),
                    kernels.assemble_values_numpy,
                    kernels.assemble_values_numba,
                ),
                "load": ((src, space.nw, space.dofmap, space.ndof), kernels.assemble_load_numpy, kernels.assemble_load_numba),
            }
            for name, (a, f_np, f_nb) in cases.items():
                t_np = min(timeit.repeat(lambda: f_np(*a), number=1, repeat=args.repeat))
                ref = f_np(*a)
                if HAVE_NUMBA:
                    f_nb(*a)  # compile outside the timing
                    t_nb = min(timeit.repeat(lambda: f_nb(*a), number=1, repeat=args.repeat))
                    diff = np.abs(f_nb(*a) - ref).max() / np.abs(ref).max()
                    print(f"{n:>5}^2 {nf:>6} {name:>8} {1e3 * t_np:11.3f} {1e3 * t_nb:11.3f} {t_np / t_nb:6.1f} {diff:13.2e}")
                else:
                    print(f"{n:>5}^2 {nf:>6} {name:>8} {1e3 * t_np:11.3f} {'-':>11} {'-':>6} {'-':>13}")


if __name__ == "__main__":
    main()
