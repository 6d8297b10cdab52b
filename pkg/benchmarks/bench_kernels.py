"""Benchmark the numba kernels against the pure-numpy fallback.

Runs both backends in-process (they are separate modules; the env flag
only chooses which one the package re-exports) on the workloads that
dominate the experiment table: dense design-matrix assembly and
piecewise-polynomial evaluation.

Usage:  python benchmarks/bench_kernels.py [--repeats 20]
"""

import argparse
import time

import numpy as np

from projreg._accel import nb_impl, np_impl
from projreg.splines import gauss_rule


def best_of(fn, repeats):
    timings = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        timings.append(time.perf_counter() - t0)
    return min(timings)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    gl_x, gl_w = gauss_rule(16)
    rng = np.random.default_rng(0)
    cases = [
        ("design matrix n=8,  dense 513", 8, np.linspace(0, 1, 513)),
        ("design matrix n=24, dense 1537", 24, np.linspace(0, 1, 1537)),
        ("design matrix n=64, dense 4097", 64, np.linspace(0, 1, 4097)),
    ]

    print(f"{'workload':34s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for name, n, targets in cases:
        coeffs = rng.standard_normal((n, 2))
        fns = {}
        for label, impl in (("numpy", np_impl), ("numba", nb_impl)):
            impl.volterra_design_matrix(targets, n, 2, 2, gl_x, gl_w)  # warm
            fns[label] = (lambda impl=impl: impl.volterra_design_matrix(
                targets, n, 2, 2, gl_x, gl_w))
        t_np = best_of(fns["numpy"], args.repeats)
        t_nb = best_of(fns["numba"], args.repeats)
        print(f"{name:34s} {t_np * 1e3:9.2f}ms {t_nb * 1e3:9.2f}ms "
              f"{t_np / t_nb:7.1f}x")

    ts = rng.uniform(0, 1, 100_000)
    coeffs = rng.standard_normal((64, 2))
    for label, impl in (("numpy", np_impl), ("numba", nb_impl)):
        impl.piecewise_eval(coeffs, 64, 2, ts)  # warm
    t_np = best_of(lambda: np_impl.piecewise_eval(coeffs, 64, 2, ts), args.repeats)
    t_nb = best_of(lambda: nb_impl.piecewise_eval(coeffs, 64, 2, ts), args.repeats)
    print(f"{'piecewise eval 1e5 pts, n=64':34s} {t_np * 1e3:9.2f}ms "
          f"{t_nb * 1e3:9.2f}ms {t_np / t_nb:7.1f}x")

    agree = np.max(np.abs(
        np_impl.volterra_design_matrix(np.linspace(0, 1, 257), 16, 2, 2, gl_x, gl_w)
        - nb_impl.volterra_design_matrix(np.linspace(0, 1, 257), 16, 2, 2, gl_x, gl_w)))
    print(f"\nbackend agreement (max abs diff): {agree:.2e}")


if __name__ == "__main__":
    main()
