"""Independent brute-force references shared by the unit and acceptance tests."""

import math

import numpy as np


def eq_profile(l):
    """Triangular weights evaluated term by term, t = 1..l."""
    c = math.ceil(l / 2)
    return [(c - abs(t - c)) / c ** 2 for t in range(1, l + 1)]


def dense_smooth(grid, l_t, l_f):
    """Nested-loop 2-D filtering with edge-replicate padding and the full outer-product kernel."""
    pt, pf = eq_profile(l_t), eq_profile(l_f)
    n_t, n_f = grid.shape
    ht, hf = (l_t - 1) // 2, (l_f - 1) // 2
    out = np.zeros((n_t, n_f))
    for t in range(n_t):
        for f in range(n_f):
            acc = 0.0
            for i in range(l_t):
                for j in range(l_f):
                    tt = min(max(t + i - ht, 0), n_t - 1)
                    ff = min(max(f + j - hf, 0), n_f - 1)
                    acc += pt[i] * pf[j] * grid[tt, ff]
            out[t, f] = acc
    return out


def msd_loops(a, b):
    out = []
    for t in range(a.shape[0]):
        s = 0.0
        for f in range(a.shape[1]):
            s += (float(a[t, f]) - float(b[t, f])) ** 2
        out.append(math.sqrt(s))
    return out
