"""Benchmark the numba kernels against their vectorized numpy fallbacks.

Run:  python3 benchmarks/bench_kernels.py [--repeat 5]

Each kernel pair computes identical results (see tests/test_kernels.py);
this script only compares wall time. The numba flavors are warmed up once
so JIT compilation does not pollute the timings.
"""

import argparse
import time

import numpy as np

import mixvis.kernels as k


def timeit(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_eval_gmm1d(rng):
    xs = rng.uniform(-5, 5, 500_000)
    w = rng.uniform(0.1, 1.0, 6)
    mu = rng.uniform(-3, 3, 6)
    var = rng.uniform(0.1, 2.0, 6)
    out = np.zeros_like(xs)
    return (xs, w, mu, var, out), "eval_gmm1d (500k pts, K=6)"

def bench_accum_gauss2d(rng):
    n = 400
    amps = rng.uniform(0.5, 2.0, n)
    mxs = rng.uniform(-2, 2, n)
    mys = rng.uniform(-2, 2, n)
    ia = rng.uniform(0.5, 3.0, n)
    ic = rng.uniform(0.5, 3.0, n)
    ib = rng.uniform(-0.4, 0.4, n) * np.sqrt(ia * ic)
    ix0 = np.zeros(n, dtype=np.int64)
    ix1 = np.full(n, 200, dtype=np.int64)
    iy0 = np.zeros(n, dtype=np.int64)
    iy1 = np.full(n, 200, dtype=np.int64)
    buf = np.zeros((200, 200))
    return (
        buf, -3.0, 0.03, -3.0, 0.03, amps, mxs, mys, ia, ib, ic, ix0, ix1, iy0, iy1, 9.0
    ), "accum_gauss2d (400 comps, 200x200)"

def bench_splat(rng):
    nc = 300
    rects = np.zeros((nc, 4), dtype=np.int64)
    rects[:, 1] = 320
    rects[:, 3] = 240
    invs = np.empty((nc, 3, 3))
    for i in range(nc):
        m = rng.standard_normal((3, 3))
        invs[i] = np.linalg.inv(m @ m.T + np.eye(3))
    mus = rng.uniform(-1, 1, (nc, 3)) + np.array([0, 8, 0])
    log_prefs = np.log(rng.uniform(0.001, 0.05, nc))
    scales = rng.uniform(1.0, 30.0, nc)
    tfas = rng.uniform(0.2, 1.0, nc)
    colors = rng.uniform(0, 1, (nc, 4))
    buf = np.zeros((240, 320, 4), dtype=np.float32)
    buf[:, :, 3] = 1.0
    return (
        buf, rects, invs, mus, log_prefs, scales, tfas, colors,
        np.array([0.0, -10.0, 0.0]), np.array([1.0, 0.0, 0.0]),
        np.array([0.0, 0.0, 1.0]), np.array([0.0, 1.0, 0.0]), 0.7, 0.5,
    ), "splat_accum (300 comps, 320x240)"

def bench_wasserstein(rng):
    x = np.sort(rng.normal(0, 1, 100_000))
    w = np.array([0.4, 0.6])
    mu = np.array([-0.5, 0.8])
    sig = np.array([0.7, 1.2])
    return (x, x[0] - 10, x[-1] + 10, w, mu, sig, 64, 8192), "wasserstein (100k steps, K=2)"

def bench_mahalanobis(rng):
    x = rng.normal(size=(200_000, 3))
    mus = rng.normal(size=(5, 3))
    invs = np.empty((5, 3, 3))
    for i in range(5):
        m = rng.standard_normal((3, 3))
        invs[i] = np.linalg.inv(m @ m.T + 0.5 * np.eye(3))
    out = np.empty(200_000)
    return (x, mus, invs, out), "min_mahalanobis2 (200k pts, K=5)"

def bench_kde2d(rng):
    sx = rng.normal(size=20_000)
    sy = rng.normal(size=20_000) * 0.5
    buf = np.zeros((200, 200))
    return (
        buf, -4.0, 0.04, 200, -3.0, 0.03, 200, sx, sy, 0.1, 0.08, 1.0, 6.0
    ), "kde_accum_2d (20k samples, 200x200)"


BENCHES = [
    (bench_eval_gmm1d, k.eval_gmm1d_numba, k.eval_gmm1d_numpy),
    (bench_accum_gauss2d, k.accum_gauss2d_numba, k.accum_gauss2d_numpy),
    (bench_splat, k.splat_accum_numba, k.splat_accum_numpy),
    (bench_wasserstein, k.wasserstein_gmm_steps_numba, k.wasserstein_gmm_steps_numpy),
    (bench_mahalanobis, k.min_mahalanobis2_numba, k.min_mahalanobis2_numpy),
    (bench_kde2d, k.kde_accum_2d_numba, k.kde_accum_2d_numpy),
]


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if not k.USE_NUMBA:
        print("note: numba unavailable or disabled; 'numba' column runs pure python")
    print(f"{'kernel':<40} {'numba':>10} {'numpy':>10} {'speedup':>8}")
    rng = np.random.default_rng(0)
    for make, fn_nb, fn_np in BENCHES:
        case, label = make(rng)
        fn_nb(*case)  # JIT warm-up on identical types
        t_nb = timeit(fn_nb, case, args.repeat)
        t_np = timeit(fn_np, case, args.repeat)
        print(f"{label:<40} {t_nb * 1e3:>8.2f}ms {t_np * 1e3:>8.2f}ms {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
