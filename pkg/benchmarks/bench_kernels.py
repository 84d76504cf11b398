#!/usr/bin/env python3
"""Benchmark the RK4 kernels: numba JIT path vs pure-numpy fallback.

Runs the single-trace kernel and the batched summary kernel on
representative cascade workloads and prints per-path timings. The numba
rows disappear when numba is unavailable or SWEATAUTH_NO_NUMBA is set.

Usage: python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import time

import numpy as np

from sweatauth import _kernels
from sweatauth.config import load_experiment
from sweatauth.kinetics import build_cascade


def time_call(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(quick=False):
    cfg = load_experiment("builtin:sex-separation")
    n_steps = 3000 if quick else 12000
    batch = 64 if quick else 650
    rows = []

    for kind in ("AltLdh", "AltPoxHrp", "AlaAspGlu"):
        net = build_cascade(kind, cfg.params)
        st_dense, vmax, sub_idx, sub_km, sub_off, sparse = net.compiled()
        init = {sp: 120.0 for sp in net.input_species}
        c0 = net.init_vector(init)
        rng = np.random.default_rng(0)
        C0 = np.tile(net.init_vector({}), (batch, 1))
        for sp in net.input_species:
            C0[:, net.index(sp)] = rng.uniform(20, 400, batch)

        variants = [("numpy", _kernels.rk4_trace_numpy, _kernels.rk4_batch_numpy)]
        if _kernels.HAVE_NUMBA:
            # warm the JIT outside the timed region
            _kernels.rk4_trace_numba(c0, st_dense, vmax, sub_idx, sub_km, sub_off,
                                     10, 0.01, _sparse=sparse)
            _kernels.rk4_batch_numba(C0[:2], st_dense, vmax, sub_idx, sub_km,
                                     sub_off, 10, 0.01, _sparse=sparse)
            variants.append(("numba", None, None))

        for name, trace_fn, batch_fn in variants:
            if name == "numba":
                t_trace = time_call(lambda: _kernels.rk4_trace_numba(
                    c0, st_dense, vmax, sub_idx, sub_km, sub_off, n_steps, 0.01,
                    _sparse=sparse))
                t_batch = time_call(lambda: _kernels.rk4_batch_numba(
                    C0, st_dense, vmax, sub_idx, sub_km, sub_off, n_steps, 0.01,
                    _sparse=sparse), repeats=1 if not quick else 2)
            else:
                t_trace = time_call(lambda: trace_fn(
                    c0, st_dense, vmax, sub_idx, sub_km, sub_off, n_steps, 0.01))
                t_batch = time_call(lambda: batch_fn(
                    C0, st_dense, vmax, sub_idx, sub_km, sub_off, n_steps, 0.01),
                    repeats=1 if not quick else 2)
            rows.append((kind, name, t_trace, t_batch))

    print(f"\nworkload: trace = 1 sim x {n_steps} steps, "
          f"batch = {batch} sims x {n_steps} steps\n")
    print(f"{'cascade':<12} {'path':<7} {'trace [s]':>10} {'batch [s]':>10}")
    print("-" * 44)
    for kind, name, t_trace, t_batch in rows:
        print(f"{kind:<12} {name:<7} {t_trace:>10.3f} {t_batch:>10.3f}")

    if _kernels.HAVE_NUMBA:
        print("\nspeedup (numpy / numba):")
        by_kind = {}
        for kind, name, t_trace, t_batch in rows:
            by_kind.setdefault(kind, {})[name] = (t_trace, t_batch)
        for kind, d in by_kind.items():
            s_trace = d["numpy"][0] / d["numba"][0]
            s_batch = d["numpy"][1] / d["numba"][1]
            print(f"  {kind:<12} trace {s_trace:>6.1f}x   batch {s_batch:>6.1f}x")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true", help="smaller workload")
    args = ap.parse_args()
    bench(quick=args.quick)
