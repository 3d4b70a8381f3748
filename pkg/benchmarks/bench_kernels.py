#!/usr/bin/env python3
"""Compare the numba and pure-numpy kernel backends.

Times the ghost fill, the right-hand side, one RKL2 stage combination and a
full explicit step on 2D polar grids and a 1D interval grid.

Usage:
    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --sizes 32 64 128 --repeat 20
"""
import argparse
import math
import timeit

import numpy as np

from torusflow import GraphState, StepperConfig, build_grid, kernels, make_circle_profile, make_interval_profile, step
from torusflow.flow import _fill, _rhs


def _cases(grid, u):
    state = GraphState.from_field(grid, u)
    out = np.empty(grid.shape)
    vt2 = np.empty(grid.shape)
    # the stage kernel works on 2D arrays; 1D fields are viewed as one row
    shape2 = grid.shape if grid.dim == 2 else (1, grid.shape[0])
    a = [np.random.default_rng(0).standard_normal(shape2) for _ in range(7)]
    cfg = StepperConfig()
    return {
        "fill": lambda: _fill(grid, state.padded),
        "rhs": lambda: _rhs(grid, state.padded, out, vt2),
        "rkl2_stage": lambda: kernels.active().rkl2_stage(a[0], a[1], a[2], a[3], a[4], a[5], a[6],
                                                          1.1, -0.1, 1e-3, -1e-4),
        "euler_step": lambda: step(state, cfg),
    }


def _time(fn, repeat):
    fn()  # trigger compilation
    number = max(1, int(0.05 / max(timeit.timeit(fn, number=1), 1e-7)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128])
    ap.add_argument("--n1d", type=int, default=513)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    grids = [("1D n=%d" % args.n1d, build_grid(make_interval_profile(1.0, 2.0), args.n1d))]
    circle = make_circle_profile((0.0, 2.0), 0.5)
    grids += [("2D %dx%d" % (n, n), build_grid(circle, (n, n))) for n in args.sizes]

    print(f"{'grid':<12} {'kernel':<11} {'numba [us]':>11} {'numpy [us]':>11} {'speedup':>8}")
    prev = kernels.active().name
    try:
        for label, grid in grids:
            s = grid.r if grid.dim == 1 else np.broadcast_to(grid.s[:, None], grid.shape)
            u = 2 * math.pi * np.cos(math.pi * (s - s.min()) / np.ptp(s))
            times = {}
            for backend in ("numba", "numpy"):
                kernels.use_backend(backend)
                for name, fn in _cases(grid, u).items():
                    times[name, backend] = _time(fn, args.repeat)
            for name in ("fill", "rhs", "rkl2_stage", "euler_step"):
                tb, tn = times[name, "numba"], times[name, "numpy"]
                print(f"{label:<12} {name:<11} {tb * 1e6:11.1f} {tn * 1e6:11.1f} {tn / tb:8.2f}")
    finally:
        kernels.use_backend(prev)


if __name__ == "__main__":
    main()
