"""Reference disaggregation methods: Mean, minimum-norm LS, CMTF, CPD oracle.

All baselines consume the same two aggregated views (and, except for the
CPD oracle, the aggregation operator) and produce a fine-resolution
estimate.  The LS and CMTF solvers never materialize Kronecker products;
the big operators act through mode products.
"""

import time
import warnings

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .aggregation import AggregationOperator
from .core import as_mask, as_tensor, fold, mode_product, reconstruct, unfold
from .cpd import cpd_als
from .kernels import FitTerm, KronPair, line_update
from .report import SolverReport

__all__ = ["mean_baseline", "ls_baseline", "cmtf_solve", "cmtf_baseline",
           "cmtf_cost", "cpd_oracle", "BASELINE_NAMES"]

BASELINE_NAMES = ("mean", "ls", "cmtf", "cpd-oracle")


def _per_atom_divisors(op: AggregationOperator):
    """Atoms-per-measurement divisor for each mode (1 for average/identity kinds)."""
    div = []
    for mode, m in enumerate((op.U, op.V, op.W), start=1):
        if op.kinds[mode - 1] == "sum":
            div.append((m > 0).sum(axis=1).astype(np.float64))
        else:
            div.append(np.ones(m.shape[0]))
    return div


def mean_baseline(y_t, mask_t, y_c, mask_c, op: AggregationOperator) -> np.ndarray:
    """Equal-share estimate: each aggregate is split evenly over the fine
    atoms it covers, and the per-view estimates are averaged.

    Entries observed by only one view take that view's estimate; entries
    covered by neither are 0 (a warning reports how many).
    """
    y_t = as_tensor(y_t)
    y_c = as_tensor(y_c)
    mask_t = as_mask(mask_t, y_t.shape)
    mask_c = as_mask(mask_c, y_c.shape)
    div_u, div_v, div_w = _per_atom_divisors(op)
    cover_u = (op.U > 0).astype(np.float64)
    cover_v = (op.V > 0).astype(np.float64)
    cover_w = (op.W > 0).astype(np.float64)

    share_t = (mask_t * y_t) / div_w[None, None, :]
    num = mode_product(share_t, cover_w.T, 3)
    den = mode_product(mask_t, cover_w.T, 3)

    share_c = (mask_c * y_c) / (div_u[:, None, None] * div_v[None, :, None])
    num += mode_product(mode_product(share_c, cover_u.T, 1), cover_v.T, 2)
    den += mode_product(mode_product(mask_c, cover_u.T, 1), cover_v.T, 2)

    uncovered = den == 0
    if uncovered.any():
        warnings.warn(f"{int(uncovered.sum())} fine entries are covered by neither view; "
                      "their estimate is 0", stacklevel=2)
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=~uncovered)
    return out


def ls_baseline(y_t, mask_t, y_c, mask_c, op: AggregationOperator,
                cg_iterations: int = 2000, rtol: float = 1e-12) -> np.ndarray:
    """Minimum-norm least-squares estimate of the fine tensor.

    Runs conjugate gradient on the normal equations of the stacked masked
    aggregation system, applied matrix-free through mode products; the
    zero start keeps the iterates in the row space, so a consistent
    underdetermined system yields the minimum-norm solution.
    """
    y_t = as_tensor(y_t)
    y_c = as_tensor(y_c)
    mask_t = as_mask(mask_t, y_t.shape)
    mask_c = as_mask(mask_c, y_c.shape)
    dims = op.fine_dims
    n = int(np.prod(dims))

    def forward_t(x):
        return mask_t * mode_product(x, op.W, 3)

    def adjoint_t(r):
        return mode_product(mask_t * r, op.W.T, 3)

    def forward_c(x):
        out = mode_product(x, op.U, 1)
        if not op.is_identity(2):
            out = mode_product(out, op.V, 2)
        return mask_c * out

    def adjoint_c(r):
        out = mask_c * r
        if not op.is_identity(2):
            out = mode_product(out, op.V.T, 2)
        return mode_product(out, op.U.T, 1)

    def normal_matvec(vec):
        x = vec.reshape(dims, order="F")
        out = adjoint_t(forward_t(x)) + adjoint_c(forward_c(x))
        return out.ravel(order="F")

    b = (adjoint_t(mask_t * y_t) + adjoint_c(mask_c * y_c)).ravel(order="F")
    operator = LinearOperator((n, n), matvec=normal_matvec)
    sol, info = cg(operator, b, rtol=rtol, atol=0.0, maxiter=cg_iterations)
    if info != 0:
        resid = np.linalg.norm(normal_matvec(sol) - b)
        warnings.warn(f"conjugate gradient stopped after {cg_iterations} iterations "
                      f"with normal-equation residual {resid:.3e}", stacklevel=2)
    return sol.reshape(dims, order="F")


def _cmtf_init(y3c, u, v, rank):
    """Rank-R SVD of the zero-filled contemporaneous unfolding, with the
    row factor lifted to fine resolution through the operator pseudoinverses."""
    svd_u, svd_s, svd_vt = np.linalg.svd(y3c, full_matrices=False)
    r_avail = min(rank, svd_s.size)
    scale = np.sqrt(svd_s[:r_avail])
    a_low = svd_u[:, :r_avail] * scale
    b = svd_vt[:r_avail].T * scale
    if r_avail < rank:
        pad = rank - r_avail
        a_low = np.hstack([a_low, np.zeros((a_low.shape[0], pad))])
        b = np.hstack([b, np.zeros((b.shape[0], pad))])
    lift = KronPair(np.linalg.pinv(u), np.linalg.pinv(v))
    return lift @ a_low, b


def cmtf_solve(y_t, mask_t, y_c, mask_c, op: AggregationOperator,
               rank: int, iterations: int = 50):
    """Coupled matricized factorization: fit Y3_t ~ A (WB)^T and
    Y3_c ~ (V kr-pair U) A B^T over A (IJ x R) and B (K x R).

    Alternates exact line-search descent on A and B; the cost never
    increases.  Returns ``((A, B), report)``.
    """
    t_start = time.perf_counter()
    y_t = as_tensor(y_t)
    y_c = as_tensor(y_c)
    mask_t = as_mask(mask_t, y_t.shape)
    mask_c = as_mask(mask_c, y_c.shape)
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    y3t, m3t = unfold(y_t, 3), unfold(mask_t, 3)
    y3c, m3c = unfold(y_c, 3), unfold(mask_c, 3)
    pair = KronPair(op.U, op.V)
    if pair.shape != (y3c.shape[0], y3t.shape[0]):
        raise ValueError(f"operator dims {pair.shape} do not match view unfoldings "
                         f"{(y3c.shape[0], y3t.shape[0])}")
    w = op.W
    a, b = _cmtf_init(y3c * m3c, op.U, op.V, rank)
    report = SolverReport(solver="cmtf")
    for it in range(1, iterations + 1):
        tic = time.perf_counter()
        terms = [FitTerm(y3t.T, m3t.T, w @ b),
                 FitTerm(y3c.T, m3c.T, b, agg=pair)]
        a, step, _, cost_after = line_update(a, terms)
        report.add(it, "A", cost_after, step, (time.perf_counter() - tic) * 1e3)
        tic = time.perf_counter()
        terms = [FitTerm(y3t, m3t, a, agg=w),
                 FitTerm(y3c, m3c, pair @ a)]
        b, step, _, cost_after = line_update(b, terms)
        report.add(it, "B", cost_after, step, (time.perf_counter() - tic) * 1e3)
        report.iterations = it
    report.final_cost = report.rows[-1]["cost"]
    report.wall_ms = (time.perf_counter() - t_start) * 1e3
    return (a, b), report


def cmtf_baseline(y_t, mask_t, y_c, mask_c, op: AggregationOperator,
                  rank: int, iterations: int = 50) -> np.ndarray:
    """Fine-tensor estimate fold(A B^T) from :func:`cmtf_solve`."""
    (a, b), _ = cmtf_solve(y_t, mask_t, y_c, mask_c, op, rank, iterations)
    return fold(a @ b.T, 3, op.fine_dims)


def cmtf_cost(y_t, mask_t, y_c, mask_c, op, a, b) -> float:
    """Objective value of the matricized coupled fit at (A, B)."""
    r1 = unfold(mask_t, 3) * (a @ (op.W @ b).T - unfold(y_t, 3))
    pair = KronPair(op.U, op.V)
    r2 = unfold(mask_c, 3) * ((pair @ a) @ b.T - unfold(y_c, 3))
    return float(np.vdot(r1, r1)) + float(np.vdot(r2, r2))


def cmtf_gradients(y_t, mask_t, y_c, mask_c, op, a, b):
    """Gradients of the matricized coupled fit with respect to A and B."""
    from .kernels import gradient

    y3t, m3t = unfold(y_t, 3), unfold(mask_t, 3)
    y3c, m3c = unfold(y_c, 3), unfold(mask_c, 3)
    pair = KronPair(op.U, op.V)
    g_a = gradient([FitTerm(y3t.T, m3t.T, op.W @ b),
                    FitTerm(y3c.T, m3c.T, b, agg=pair)], a)
    g_b = gradient([FitTerm(y3t, m3t, a, agg=op.W),
                    FitTerm(y3c, m3c, pair @ a)], b)
    return g_a, g_b


def cpd_oracle(x, mask, rank: int, sweeps: int = 50, seed=0) -> np.ndarray:
    """Masked CPD fit to the ground truth itself (evaluation lower bound)."""
    x = as_tensor(x)
    mask = as_mask(mask, x.shape)
    if not mask.any():
        warnings.warn("no observed entries; returning the reconstruction of the "
                      "initial factors", stacklevel=2)
    f = cpd_als(x * mask, mask, rank, iterations=sweeps, seed=seed)
    return reconstruct(f)
