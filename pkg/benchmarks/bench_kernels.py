"""Timing comparison of the compiled and pure-numpy kernel variants.

Run as ``python3 benchmarks/bench_kernels.py``.  The compiled column reads
"numpy" when numba is disabled (RISPLAN_NUMBA=0) or unavailable, in which
case both columns time the same code.
"""

import timeit

import numpy as np

from risplan._accel import NUMBA_ENABLED
from risplan.kernels import (
    ascent_quadratic,
    ascent_quadratic_numpy,
    forward_fill,
    forward_fill_numpy,
    max_pair_contrast,
    max_pair_contrast_numpy,
)


def time_of(fn, *args, repeat=5, number=3):
    fn(*args)  # warm-up; triggers JIT compilation on the numba path
    return min(timeit.repeat(lambda: fn(*args), repeat=repeat, number=number)) / number


def contrast_case(rng):
    values = rng.standard_normal((8, 4001)) + 1j * rng.standard_normal((8, 4001))
    return (values,)


def ascent_case(rng):
    m = 96
    b = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    V = a.conj().T @ a
    lookup = np.exp(2j * np.pi * np.arange(8) / 8)
    init = np.zeros(m, dtype=np.int64)
    return b, V, 0.5, lookup, init, 50, 1e-9


def fill_case(rng):
    n = 1_000_000
    return rng.random(n) < 0.3, rng.integers(0, 33, n)


def main():
    rng = np.random.default_rng(0)
    cases = [
        ("max_pair_contrast (8 states, 4001 freqs)",
         max_pair_contrast, max_pair_contrast_numpy, contrast_case(rng)),
        ("ascent_quadratic (96 elems, 8 phases)",
         ascent_quadratic, ascent_quadratic_numpy, ascent_case(rng)),
        ("forward_fill (1e6 slots)",
         forward_fill, forward_fill_numpy, fill_case(rng)),
    ]
    backend = "numba" if NUMBA_ENABLED else "numpy"
    print(f"configured backend: {backend}")
    print(f"{'kernel':44s} {backend:>10s} {'numpy':>10s} {'ratio':>7s}")
    for label, bound, plain, args in cases:
        t_bound = time_of(bound, *args)
        t_plain = time_of(plain, *args)
        print(f"{label:44s} {t_bound * 1e3:8.2f}ms {t_plain * 1e3:8.2f}ms "
              f"{t_plain / t_bound:6.1f}x")


if __name__ == "__main__":
    main()
