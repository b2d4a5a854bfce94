"""Compare the numba and pure-numpy backends on the two hot kernels.

Run:  python3 benchmarks/bench_backends.py
"""

import time

import numpy as np

from wienerpath.backends import _jit, _reference


def timeit(fn, *args, repeats=5):
    fn(*args)   # warm up (jit compilation)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = np.random.default_rng(42)

    u = rng.uniform(-1.0, 1.0, size=500_000)
    args_heat = (u, 0.05, 1.0 / (4.0 * np.pi), 120)

    deltas = rng.normal(size=(20_000, 64, 2)) * 0.125
    x0 = np.array([0.0, 0.0, 1.0])
    e1 = np.array([1.0, 0.0, 0.0])
    e2 = np.array([0.0, 1.0, 0.0])
    args_dev = (deltas, x0, e1, e2, 1.0)

    print(f"{'kernel':<22} {'numpy':>10} {'numba':>10} {'speedup':>9}")
    for name, ref_fn, jit_fn, args in [
            ("sphere_heat_series", _reference.sphere_heat_series,
             _jit.sphere_heat_series, args_heat),
            ("develop_sphere", _reference.develop_sphere,
             _jit.develop_sphere, args_dev)]:
        t_ref = timeit(ref_fn, *args)
        t_jit = timeit(jit_fn, *args)
        print(f"{name:<22} {t_ref * 1e3:>8.1f}ms {t_jit * 1e3:>8.1f}ms "
              f"{t_ref / t_jit:>8.1f}x")

    out_ref = _reference.develop_sphere(*args_dev)[0]
    out_jit = _jit.develop_sphere(*args_dev)[0]
    print(f"max backend deviation: {np.max(np.abs(out_ref - out_jit)):.3e}")


if __name__ == "__main__":
    main()
