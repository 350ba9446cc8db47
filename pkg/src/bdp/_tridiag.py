"""Tridiagonal elimination for ``(alpha - Q_N) x = r`` with a Dirichlet cut beyond N.

Row ``i`` reads ``(alpha + a_i + b_i) x_i - a_i x_{i-1} - b_i x_{i+1} = r_i``.
Instead of the pivots themselves we propagate their excess over ``b_i``,

    e_0 = alpha,   e_i = alpha + a_i * e_{i-1} / p_{i-1},   p_i = e_i + b_i,

which involves additions of positive numbers only.  For a nonnegative right
hand side the whole solve is subtraction-free, so tiny solution components
(far out in the chain) keep full relative accuracy.
"""

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is optional at runtime
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


@njit(cache=True)
def factor(a, b, alpha):
    n = a.shape[0]
    p = np.empty(n)
    lo = np.empty(n)
    e = alpha
    p[0] = e + b[0]
    lo[0] = 0.0
    for i in range(1, n):
        lo[i] = a[i] / p[i - 1]
        e = alpha + lo[i] * e
        p[i] = e + b[i]
    return p, lo


@njit(cache=True)
def solve(p, lo, b, r):
    """Solve for every column of ``r`` (shape ``(n, m)``)."""
    n, m = r.shape
    y = np.empty((n, m))
    for c in range(m):
        y[0, c] = r[0, c]
    for i in range(1, n):
        for c in range(m):
            y[i, c] = r[i, c] + lo[i] * y[i - 1, c]
    x = np.empty((n, m))
    for c in range(m):
        x[n - 1, c] = y[n - 1, c] / p[n - 1]
    for i in range(n - 2, -1, -1):
        for c in range(m):
            x[i, c] = (y[i, c] + b[i] * x[i + 1, c]) / p[i]
    return x
