"""Shared independent oracles for the test suite.

These deliberately avoid the library's own kernels: reconstruction by
triple loop, gradients by central differences, and 1-D minimization by
golden section, so every derived expectation is checked against a second
path.
"""

import numpy as np


def reconstruct_loop(a, b, c):
    """Rank-R reconstruction by explicit summation over all indices."""
    i, r = a.shape
    j = b.shape[0]
    k = c.shape[0]
    out = np.zeros((i, j, k))
    for ii in range(i):
        for jj in range(j):
            for kk in range(k):
                s = 0.0
                for rr in range(r):
                    s += a[ii, rr] * b[jj, rr] * c[kk, rr]
                out[ii, jj, kk] = s
    return out


def central_diff(cost, mat):
    """Central finite-difference gradient of ``cost`` w.r.t. the entries of
    ``mat`` (mutated in place and restored), step 1e-6 * max(1, |entry|)."""
    g = np.zeros_like(mat)
    for idx in np.ndindex(mat.shape):
        h = 1e-6 * max(1.0, abs(mat[idx]))
        saved = mat[idx]
        mat[idx] = saved + h
        up = cost()
        mat[idx] = saved - h
        down = cost()
        mat[idx] = saved
        g[idx] = (up - down) / (2.0 * h)
    return g


def fd_close(analytic, numeric, tol):
    """Max per-entry relative deviation between a gradient and its
    finite-difference estimate, using max(1, |fd|) normalization."""
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric)))) < tol


def golden_section(f, lo, hi, tol=1e-12, max_iter=300):
    """Golden-section minimizer of a unimodal function on [lo, hi]."""
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def monotone(costs, slack_rel=1e-10):
    """True when the cost sequence never rises beyond relative slack."""
    costs = list(costs)
    if not costs:
        return True
    allowed = slack_rel * max(costs[0], 1.0)
    return all(costs[i + 1] <= costs[i] + allowed for i in range(len(costs) - 1))
