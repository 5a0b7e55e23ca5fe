#!/usr/bin/env python3
"""Time the numba kernels against the pure-numpy fallbacks.

Runs the two hot operations on an example2-sized workload (4x2 frames,
1000 x-steps, a 601-point lambda grid) and prints a small table.  The numba
rows appear only when the JIT backend is importable and not disabled via
RENOSC_DISABLE_NUMBA.

    python3 benchmarks/bench_kernels.py [--x-steps N] [--lambdas L] [--repeat R]
"""

import argparse
import time

import numpy as np

from renosc import _kernels, builtin_catalog, load_problem


def timeit(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--x-steps", type=int, default=1000)
    ap.add_argument("--lambdas", type=int, default=601)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    problem = load_problem(builtin_catalog("example2"))
    field = problem.field
    steps = args.x_steps
    h = 1.0 / steps
    xs = 0.5 * h * np.arange(2 * steps + 1)
    a_half = np.ascontiguousarray(field.base_table(xs))
    E = field.lambda_mat
    lams = np.linspace(problem.lambda1, problem.lambda2, args.lambdas)
    init = problem.P.entries
    AT = problem.a_tilde()

    rows = []

    def bench_rk4(impl, name):
        t, (frames, _) = timeit(lambda: impl(a_half, E, lams, init, h, True), args.repeat)
        rows.append((f"rk4_grid [{name}]", t))
        return frames

    frames = bench_rk4(_kernels._rk4_grid_numpy, "numpy")
    if _kernels.NUMBA_ENABLED:
        _kernels.warmup()
        jit_frames = bench_rk4(_kernels._rk4_grid_jit, "numba")
        assert np.max(np.abs(jit_frames - frames)) < 1e-10

    G = np.ascontiguousarray(frames.reshape(-1, *frames.shape[2:]))
    H = np.ascontiguousarray(
        np.broadcast_to(problem.h_path().frames, frames.shape).reshape(G.shape[0], 4, 2)
    )

    t, ref = timeit(lambda: _kernels._omega_tables_numpy(G, H, AT.block_g, AT.block_h),
                    args.repeat)
    rows.append(("omega_tables [numpy]", t))
    if _kernels.NUMBA_ENABLED:
        t, out = timeit(lambda: _kernels._omega_tables_jit(G, H, AT.block_g, AT.block_h),
                        args.repeat)
        rows.append(("omega_tables [numba]", t))
        assert max(np.max(np.abs(a - b)) for a, b in zip(out, ref)) < 1e-10

    nodes = G.shape[0]
    print(f"workload: {args.lambdas} lambda lines x {steps} steps "
          f"({nodes} form evaluations), backend available: "
          f"{_kernels.backend_name()}")
    for name, t in rows:
        print(f"  {name:26s} {t * 1e3:10.1f} ms")
    by = {n: t for n, t in rows}
    if _kernels.NUMBA_ENABLED:
        s1 = by["rk4_grid [numpy]"] / by["rk4_grid [numba]"]
        s2 = by["omega_tables [numpy]"] / by["omega_tables [numba]"]
        print(f"  speedup: rk4 {s1:.1f}x, omega tables {s2:.1f}x")


if __name__ == "__main__":
    main()
