#!/usr/bin/env python3
"""Benchmark the compiled hot loops against the pure-numpy fallback.

Runs the tracking, network-learning, OGD, and simulation kernels on a
mid-size synthetic workload under the current backend, then re-runs the same
workload in a subprocess with HAWKESTRACK_NUMBA=0 and prints the side-by-side
timings.  Backends share the source and random streams; outputs agree to
floating-point rounding, only speed differs.

    python benchmarks/bench_backends.py [--quick] [--inner]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def build_workload(quick: bool):
    import hawkestrack as ht
    from hawkestrack.kernels import ExponentialKernel
    from hawkestrack.simulate import GeneratorConfig, simulate_hawkes

    p = 20 if quick else 50
    T = 400.0 if quick else 2000.0
    rng = np.random.default_rng(0)
    W = rng.uniform(0, 0.5 / p, (p, p))
    mu = rng.uniform(0.02, 0.05, p)
    kern = ExponentialKernel(float(np.exp(-1.0)))
    cfg = GeneratorConfig(p=p, T=T, mu_bar=mu, W=W, kernel=kern, seed=7)
    stream = simulate_hawkes(cfg)
    binned = ht.discretize(stream, 0.1)
    return cfg, stream, binned, kern, W, mu


def run_once(quick: bool) -> dict:
    import hawkestrack as ht
    from hawkestrack.netlearn import run_learning, run_ogd_learning
    from hawkestrack.simulate import simulate_hawkes
    from hawkestrack.tracker import run_tracking

    cfg, stream, binned, kern, W, mu = build_workload(quick)
    timings = {"backend": "numba" if ht.using_numba() else "numpy", "n_bins": binned.n_bins, "p": binned.p}

    def bench(name, fn, repeats=3):
        fn()  # warm-up (JIT compile / cache touch)
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        timings[name] = best

    bench("simulate", lambda: simulate_hawkes(cfg))
    bench("track", lambda: run_tracking(binned, kern, W, mu, eta0=1.0))
    bench("learn", lambda: run_learning(binned, kern, mu, eta0=1.0, rho0=0.01, gamma=1e-3))
    bench("ogd", lambda: run_ogd_learning(binned, kern, mu, rho0=0.01, gamma=1e-3))
    return timings


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--quick", action="store_true", help="smaller workload")
    ap.add_argument("--inner", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()

    mine = run_once(args.quick)
    if args.inner:
        print(json.dumps(mine))
        return 0

    env = dict(os.environ, HAWKESTRACK_NUMBA="0" if mine["backend"] == "numba" else "1")
    cmd = [sys.executable, os.path.abspath(__file__), "--inner"] + (["--quick"] if args.quick else [])
    out = subprocess.run(cmd, capture_output=True, text=True, env=env, check=True)
    other = json.loads(out.stdout.strip().splitlines()[-1])

    first, second = (mine, other) if mine["backend"] == "numba" else (other, mine)
    print(f"workload: p={mine['p']}, {mine['n_bins']} bins")
    print(f"{'kernel':<10} {'numba (s)':>12} {'numpy (s)':>12} {'speedup':>9}")
    for name in ("simulate", "track", "learn", "ogd"):
        speed = second[name] / first[name]
        print(f"{name:<10} {first[name]:>12.4f} {second[name]:>12.4f} {speed:>8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
