"""Masked CPD via alternating least squares, plus the coupled-solver initialization.

The ALS update solves each factor row against the rows of the Khatri-Rao
matrix selected by that row's observed entries (masked normal equations
with a tiny ridge for degenerate rows), so the masked fit cost is
non-increasing per sweep.  The initialization recipe fits a CPD to one
zero-filled view and recovers the remaining factor from the other view by
a masked linear solve.
"""

import numpy as np

from .core import Factors, as_mask, as_tensor, unfold
from .kernels import khatri_rao

__all__ = ["cpd_als", "solve_third_factor", "prema_init", "random_factors"]

RIDGE_SCALE = 1e-10


def random_factors(dims, rank: int, seed=0) -> Factors:
    """Seeded i.i.d. uniform(-1, 1) factor triple."""
    rng = np.random.default_rng(seed)
    return Factors(*(rng.uniform(-1.0, 1.0, size=(n, rank)) for n in dims))


def _masked_rows_solve(y, mask, lhs, current):
    """Row-wise masked least squares for one factor.

    Solves min ||mask[:, q] * (lhs @ c - y[:, q])|| for every column q of
    the matricization; rows of the factor with no observed entries keep
    their current values.
    """
    rank = lhs.shape[1]
    if mask.all():
        sol, *_ = np.linalg.lstsq(lhs, y, rcond=None)
        return sol.T
    counts = mask.sum(axis=0)
    rhs = (lhs.T @ (mask * y)).T                       # Q x R
    normal = np.einsum("pr,pq,ps->qrs", lhs, mask, lhs, optimize=True)
    ridge = RIDGE_SCALE * np.trace(normal, axis1=1, axis2=2)
    normal += ridge[:, None, None] * np.eye(rank)
    out = np.array(current, dtype=np.float64, copy=True)
    live = counts > 0
    if not live.any():
        return out
    try:
        out[live] = np.linalg.solve(normal[live], rhs[live, :, None])[:, :, 0]
    except np.linalg.LinAlgError:
        for q in np.flatnonzero(live):
            out[q], *_ = np.linalg.lstsq(normal[q], rhs[q], rcond=None)
    return out


def cpd_als(t, mask, rank: int, iterations: int = 10, seed=0, init: Factors = None) -> Factors:
    """Fit a rank-``rank`` CPD to the observed entries of ``t``.

    Sweeps update A, B, C cyclically by masked row-wise least squares;
    the masked reconstruction cost never increases across sweeps.  Starts
    from ``init`` when given, else from seeded uniform(-1, 1) factors.
    """
    t = as_tensor(t)
    mask = as_mask(mask, t.shape)
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    f = random_factors(t.shape, rank, seed) if init is None else init.copy()
    if f.dims != t.shape:
        raise ValueError(f"init dims {f.dims} do not match tensor dims {t.shape}")
    y = {m: unfold(t, m) for m in (1, 2, 3)}
    omega = {m: unfold(mask, m) for m in (1, 2, 3)}
    a, b, c = f.A, f.B, f.C
    for _ in range(iterations):
        a = _masked_rows_solve(y[1], omega[1], khatri_rao(c, b), a)
        b = _masked_rows_solve(y[2], omega[2], khatri_rao(c, a), b)
        c = _masked_rows_solve(y[3], omega[3], khatri_rao(b, a), c)
    return Factors(a, b, c)


def solve_third_factor(y, mask, lhs, mode: int = 3) -> np.ndarray:
    """Recover one factor from a view whose other factors are known.

    Solves ``unfold(y, mode) = lhs @ F^T`` by masked least squares, one
    slab (column of the matricization) at a time.  Raises
    ``numpy.linalg.LinAlgError`` naming the first slab whose observed rows
    leave ``lhs`` column-rank deficient.
    """
    y = as_tensor(y)
    mask = as_mask(mask, y.shape)
    y_unf = unfold(y, mode)
    m_unf = unfold(mask, mode)
    rank = lhs.shape[1]
    if lhs.shape[0] != y_unf.shape[0]:
        raise ValueError(f"lhs rows {lhs.shape[0]} do not match mode-{mode} "
                         f"unfolding rows {y_unf.shape[0]}")
    out = np.zeros((y_unf.shape[1], rank))
    if m_unf.all():
        sol, _, rk, _ = np.linalg.lstsq(lhs, y_unf, rcond=None)
        if rk < rank:
            raise np.linalg.LinAlgError(
                f"left matrix is column-rank deficient (rank {rk} < {rank})")
        return sol.T
    for q in range(y_unf.shape[1]):
        sel = m_unf[:, q] > 0
        if sel.sum() < rank:
            raise np.linalg.LinAlgError(
                f"slab {q}: only {int(sel.sum())} observed entries for rank {rank}")
        sol, _, rk, _ = np.linalg.lstsq(lhs[sel], y_unf[sel, q], rcond=None)
        if rk < rank:
            raise np.linalg.LinAlgError(
                f"slab {q}: observed rows leave the system rank deficient ({rk} < {rank})")
        out[q] = sol
    return out


def prema_init(y_t, mask_t, y_c, mask_c, op, rank: int, sweeps: int = 10, seed=0):
    """Seed factors for the coupled solver from the two views.

    Fits a CPD to one zero-filled view (zero-filling happens only here),
    then solves the remaining factor from the other view's observed
    entries.  When the mode-2 operator is the identity and K > I the CPD
    runs on the contemporaneous view and A comes from the temporal system;
    otherwise the CPD runs on the temporal view and C comes from the
    contemporaneous system.

    Returns ``(factors, branch)`` with ``branch`` naming the CPD view.
    """
    y_t = as_tensor(y_t)
    y_c = as_tensor(y_c)
    i = y_t.shape[0]
    k = y_c.shape[2]
    full_t = np.ones_like(y_t)
    full_c = np.ones_like(y_c)
    if op.is_identity(2) and k > i:
        # contemporaneous CPD gives (UA, B, C); A from the temporal system
        g = cpd_als(y_c * mask_c, full_c, rank, iterations=sweeps, seed=seed)
        b, c = g.B, g.C
        c_t = c if op.is_identity(3) else op.W @ c
        a = solve_third_factor(y_t, mask_t, khatri_rao(c_t, b), mode=1)
        return Factors(a, b, c), "cpd-contemporaneous"
    # temporal CPD gives (A, B, WC); C from the contemporaneous system
    g = cpd_als(y_t * mask_t, full_t, rank, iterations=sweeps, seed=seed)
    a, b = g.A, g.B
    a_c = a if op.is_identity(1) else op.U @ a
    b_c = b if op.is_identity(2) else op.V @ b
    c = solve_third_factor(y_c, mask_c, khatri_rao(b_c, a_c), mode=3)
    return Factors(a, b, c), "cpd-temporal"
