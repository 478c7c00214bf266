"""Time the compiled reduction kernels against the numpy reference backend.

Both backends expose the same four functions (neumaier_sum, central_moments,
hermite_batch, kahan_step); this script times each on common inputs, checks
that the results agree, and prints one table row per (kernel, size).

    python3 benchmarks/bench_accel.py
    python3 benchmarks/bench_accel.py --sizes 100000 1000000 --repeats 9
"""

import argparse
import time

import numpy as np

from wienermix._accel import _ref

try:
    from wienermix._accel import _fast
except ImportError:
    _fast = None


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def agree(a, b):
    return bool(np.allclose(np.asarray(a, float), np.asarray(b, float), rtol=1e-12, atol=1e-12))


def cases(n, rng):
    x = rng.standard_normal(n) * 10.0 ** rng.uniform(-4.0, 4.0, n)
    vals = rng.standard_normal(n)
    # persistent accumulators for timing; agreement is checked from zeroed state
    acc = {impl: np.zeros(n) for impl in (_ref, _fast) if impl is not None}
    comp = {impl: np.zeros(n) for impl in (_ref, _fast) if impl is not None}

    def kahan_timed(impl):
        impl.kahan_step(acc[impl], comp[impl], vals)

    def kahan_result(impl):
        a, c = np.zeros(n), np.zeros(n)
        impl.kahan_step(a, c, vals)
        return a + c

    return [
        ("neumaier_sum", lambda impl: impl.neumaier_sum(x), None),
        ("central_moments", lambda impl: impl.central_moments(x), None),
        ("hermite_batch", lambda impl: impl.hermite_batch(x, 3), None),
        ("kahan_step", kahan_timed, kahan_result),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[10_000, 100_000, 1_000_000])
    ap.add_argument("--repeats", type=int, default=7)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if _fast is None:
        print("compiled extension not built; timing the numpy reference only")
    header = f"{'kernel':<16} {'n':>9} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8}  agree"
    print(header)
    print("-" * len(header))
    for n in args.sizes:
        rng = np.random.default_rng(args.seed)
        for name, timed, result in cases(n, rng):
            result = result or timed
            t_ref = best_of(lambda: timed(_ref), args.repeats)
            if _fast is None:
                print(f"{name:<16} {n:>9} {1e3 * t_ref:>10.3f} {'-':>10} {'-':>8}")
                continue
            same = agree(result(_ref), result(_fast))
            t_fast = best_of(lambda: timed(_fast), args.repeats)
            print(
                f"{name:<16} {n:>9} {1e3 * t_ref:>10.3f} {1e3 * t_fast:>10.3f}"
                f" {t_ref / t_fast:>7.1f}x  {'yes' if same else 'NO'}"
            )


if __name__ == "__main__":
    main()
