"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

The first numba call compiles; it is timed separately and excluded from the
steady-state figures.
"""
import argparse
import time

import numpy as np

from gencs import _accel, kernels
from gencs.generative import forward, random_gaussian_init
from gencs.recovery import collapsed_problem, measure
from gencs.sampling import build_preconditioner, draw_plan, uniform
from gencs.transforms import apply, dft1d


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def adam_case(widths, m, iterations):
    net = random_gaussian_init(widths, seed=0)
    plan = draw_plan(uniform(net.n), m, seed=0)
    meas = measure(forward(net, np.random.default_rng(0).standard_normal(net.k)), plan, dft1d(net.n))
    gram, lin, const = collapsed_problem(net, meas, build_preconditioner(plan), False)
    z0 = np.random.default_rng(1).standard_normal(net.k)
    args = (list(net.weights[:-1]), gram, lin, const, z0)
    kw = dict(lr=0.003, beta1=0.9, beta2=0.999, iterations=iterations)
    return lambda use: kernels.adam_latent(*args, use_numba=use, **kw)


def pair_case(batch, n):
    x = np.random.default_rng(2).standard_normal((batch, n))
    y = apply(dft1d(n), x)
    return lambda use: kernels.pair_max(x, y, use_numba=use)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _accel._numba is None:
        print("numba is not installed: only the numpy path is available")
    cases = [("adam_latent widths=(4,32,64) iters=20000", adam_case((4, 32, 64), 32, 20000)),
             ("adam_latent widths=(4,16,256) iters=20000", adam_case((4, 16, 256), 64, 20000)),
             ("adam_latent widths=(8,64,64,128) iters=5000", adam_case((8, 64, 64, 128), 64, 5000)),
             ("pair_max batch=500 n=64", pair_case(500, 64)),
             ("pair_max batch=500 n=256", pair_case(500, 256))]
    print(f"{'case':46s} {'numpy s':>10s} {'numba s':>10s} {'compile s':>10s} {'speedup':>8s}")
    for name, fn in cases:
        t_np = best_of(lambda: fn(False), args.repeat)
        if _accel._numba is None:
            print(f"{name:46s} {t_np:10.4f} {'-':>10s} {'-':>10s} {'-':>8s}")
            continue
        t0 = time.perf_counter()
        fn(True)
        first = time.perf_counter() - t0
        t_nb = best_of(lambda: fn(True), args.repeat)
        print(f"{name:46s} {t_np:10.4f} {t_nb:10.4f} {first:10.4f} {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
