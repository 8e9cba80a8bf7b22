#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the two hot paths (nonlinear pack rollout and observer rollout) on
both backends, verifies the outputs agree, and prints a comparison table.

Usage: python3 benchmarks/bench_backends.py [--dt 0.1] [--repeat 3]
"""

import argparse
import time

import numpy as np

import parapack as pp
from parapack import backend


def build_pack(n_cells, rng):
    curve = pp.builtin_ocv("nmc")
    cells = []
    for _ in range(n_cells):
        q = float(rng.uniform(4000.0, 12000.0))
        rs = float(rng.uniform(0.08, 0.3))
        rc = ((float(rng.uniform(5e-3, 5e-2)), float(rng.uniform(2e3, 9e3))),
              (float(rng.uniform(1e-2, 2e-1)), float(rng.uniform(1e3, 9e3))))
        cells.append(pp.CellParams(q, rs, rc, curve))
    return pp.PackModel(cells)


def time_call(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_rollout(n_cells, dt, repeat):
    rng = np.random.default_rng(12345)
    model = build_pack(n_cells, rng)
    init = pp.PackState.uniform(model, 0.5)
    profile = pp.make_profile(0.1 * n_cells, 3600.0, 600.0)
    results = {}
    for name in ("numba", "numpy"):
        k = backend.get_kernels(name)
        t, traj = time_call(
            lambda: pp.simulate(model, init, profile, dt=dt, kernels=k,
                                record_cells=False), repeat)
        results[name] = (t, traj)
    (t_nb, a), (t_np, b) = results["numba"], results["numpy"]
    assert np.allclose(a.v, b.v, rtol=1e-12, atol=1e-12), "backend mismatch"
    assert np.allclose(a.i_total, b.i_total, rtol=1e-12, atol=1e-12)
    return t_nb, t_np


def bench_filter(n_states, n_steps, repeat):
    rng = np.random.default_rng(6789)
    lam = -np.sort(rng.uniform(2e-4, 4e-3, n_states))[::-1]
    a_mat = np.diag(lam)
    b_vec = rng.uniform(5e-4, 2e-3, n_states)
    c_vec = rng.uniform(-9.0, -3.0, n_states)
    # stabilizing gain: -l c^T negative semidefinite when l is parallel to c
    l_vec = 1e-4 * c_vec
    x_ref = np.full(n_states, 0.5)
    x0 = rng.uniform(0.0, 1.0, n_states)
    t = np.arange(float(n_steps))
    u = 3.7 + 0.01 * np.sin(t / 60.0)
    y = rng.normal(0.0, 0.02, t.size)
    outs = {}
    for name in ("numba", "numpy"):
        k = backend.get_kernels(name)
        dt_run, out = time_call(
            lambda: k.filter_rollout(a_mat, b_vec, c_vec, 25.0, l_vec,
                                     x_ref, 3.7, x0.copy(), t, u, y), repeat)
        outs[name] = (dt_run, out)
    (t_nb, o_nb), (t_np, o_np) = outs["numba"], outs["numpy"]
    assert np.allclose(o_nb[0], o_np[0], rtol=1e-12, atol=1e-13), "backend mismatch"
    return t_nb, t_np


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dt", type=float, default=0.1,
                        help="integrator step for the rollout cases [s]")
    parser.add_argument("--repeat", type=int, default=3,
                        help="repetitions per case (best time reported)")
    args = parser.parse_args()

    # trigger JIT compilation outside the timed region
    warm = build_pack(2, np.random.default_rng(0))
    pp.simulate(warm, pp.PackState.uniform(warm, 0.5),
                pp.make_profile(0.1, 10.0, 5.0), dt=1.0,
                kernels=backend.get_kernels("numba"))
    bench_filter(3, 16, repeat=1)

    rows = []
    for n in (2, 5, 20):
        t_nb, t_np = bench_rollout(n, args.dt, args.repeat)
        rows.append((f"pack rollout, {n:>2} cells, dt={args.dt}", t_nb, t_np))
    for n, steps in ((3, 8401), (20, 8401)):
        t_nb, t_np = bench_filter(n, steps, args.repeat)
        rows.append((f"filter rollout, {n:>2} states, {steps} steps", t_nb, t_np))

    width = max(len(r[0]) for r in rows)
    print(f"{'case':<{width}}  {'numba [s]':>10}  {'numpy [s]':>10}  {'speedup':>8}")
    for name, t_nb, t_np in rows:
        print(f"{name:<{width}}  {t_nb:>10.4f}  {t_np:>10.4f}  {t_np / t_nb:>7.1f}x")
    print("\nbackends agree on all benchmark cases (checked with allclose).")


if __name__ == "__main__":
    main()
