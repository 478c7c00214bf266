"""Reference (pure numpy / stdlib) implementations of the hot reduction kernels.

These define the semantics; the compiled extension in ``_fast.pyx`` must agree
with them bit-for-bit on the compensated reductions and to round-off on the
moment accumulators.  Selected automatically when the extension is missing or
when ``WIENERMIX_NO_ACCEL`` is set.
"""

import math

import numpy as np

BACKEND = "numpy"


def neumaier_sum(x):
    """Compensated sum of a 1-d double array.

    The reference leans on ``math.fsum`` (exactly rounded, so at least as
    accurate as a single-pass Neumaier loop).
    """
    x = np.ascontiguousarray(x, dtype=float)
    return math.fsum(x.tolist())


def central_moments(x):
    """Return (n, mean, m2, m3, m4) with m_k = mean((x - mean)^k).

    Two-pass with exactly rounded reductions; the catastrophic cancellation
    of naive E[x^4] - ... formulas is avoided by centering first.
    """
    x = np.ascontiguousarray(x, dtype=float)
    n = x.size
    if n == 0:
        raise ValueError("cannot take moments of an empty sample")
    mean = neumaier_sum(x) / n
    d = x - mean
    d2 = d * d
    m2 = neumaier_sum(d2) / n
    m3 = neumaier_sum(d2 * d) / n
    m4 = neumaier_sum(d2 * d2) / n
    return n, mean, m2, m3, m4


def hermite_batch(x, n):
    """Probabilists' Hermite polynomial He_n evaluated elementwise.

    He_0 = 1, He_1 = x, He_{k+1} = x He_k - k He_{k-1}.
    """
    if n < 0:
        raise ValueError("Hermite order must be >= 0")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if n == 0:
        return prev
    cur = x.copy()
    for k in range(1, n):
        prev, cur = cur, x * cur - k * prev
    return cur


def kahan_step(acc, comp, vals):
    """One Neumaier accumulation step, elementwise and in place.

    acc += vals with the rounding error of each elementwise add captured in
    ``comp``; the true running sum is acc + comp.
    """
    t = acc + vals
    big = np.abs(acc) >= np.abs(vals)
    comp += np.where(big, (acc - t) + vals, (vals - t) + acc)
    acc[...] = t
