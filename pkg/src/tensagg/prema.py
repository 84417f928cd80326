"""Coupled disaggregation with known aggregation operators.

Block coordinate descent on

    F(A, B, C) = ||mask_t * (Y_t - [[A, B, WC]])||_F^2
               + lam * ||mask_c * (Y_c - [[UA, VB, C]])||_F^2

cycling A, B, C with an exact line-search step along each negative
gradient, seeded by the CPD-based initialization.  Every single-factor
update is non-increasing in F by construction.
"""

import time
from dataclasses import dataclass

import numpy as np

from .aggregation import AggregationOperator, rank_bound
from .core import Factors, as_mask, as_tensor, reconstruct, unfold
from .cpd import prema_init
from .kernels import FitTerm, gradient, khatri_rao, line_update
from .report import SolverReport

__all__ = ["PremaConfig", "prema_solve", "disaggregate", "coupled_cost", "coupled_gradients"]


@dataclass
class PremaConfig:
    rank: int = 5
    max_iterations: int = 10
    init_sweeps: int = 10
    seed: int = 0
    tolerance: float = None     # relative cost-decrease stop; None = fixed budget
    coupling_weight: float = 1.0

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.coupling_weight <= 0:
            raise ValueError(f"coupling weight must be > 0, got {self.coupling_weight}")


def _check_problem(y_t, mask_t, y_c, mask_c, op: AggregationOperator):
    y_t = as_tensor(y_t)
    y_c = as_tensor(y_c)
    mask_t = as_mask(mask_t, y_t.shape)
    mask_c = as_mask(mask_c, y_c.shape)
    i, j, k = op.fine_dims
    i_u, j_v, k_w = op.coarse_dims
    if y_t.shape != (i, j, k_w):
        raise ValueError(f"temporal view dims {y_t.shape} do not match operator "
                         f"(expected {(i, j, k_w)})")
    if y_c.shape != (i_u, j_v, k):
        raise ValueError(f"contemporaneous view dims {y_c.shape} do not match operator "
                         f"(expected {(i_u, j_v, k)})")
    return y_t, mask_t, y_c, mask_c


def _aggregated(f: Factors, op: AggregationOperator):
    a_c = f.A if op.is_identity(1) else op.U @ f.A
    b_c = f.B if op.is_identity(2) else op.V @ f.B
    c_t = f.C if op.is_identity(3) else op.W @ f.C
    return a_c, b_c, c_t


def coupled_cost(y_t, mask_t, y_c, mask_c, op, f: Factors, weight: float = 1.0) -> float:
    """Value of the coupled masked objective at the given factors."""
    a_c, b_c, c_t = _aggregated(f, op)
    r_t = mask_t * (np.einsum("ir,jr,kr->ijk", f.A, f.B, c_t, optimize=True) - y_t)
    r_c = mask_c * (np.einsum("ir,jr,kr->ijk", a_c, b_c, f.C, optimize=True) - y_c)
    return float(np.vdot(r_t, r_t)) + weight * float(np.vdot(r_c, r_c))


class _Views:
    """Mode unfoldings of both views and masks, computed once per solve."""

    def __init__(self, y_t, mask_t, y_c, mask_c):
        self.t = {m: unfold(y_t, m) for m in (1, 2, 3)}
        self.mt = {m: unfold(mask_t, m) for m in (1, 2, 3)}
        self.c = {m: unfold(y_c, m) for m in (1, 2, 3)}
        self.mc = {m: unfold(mask_c, m) for m in (1, 2, 3)}


def _terms(block, views, op, f, weight):
    """The two masked fit terms seen by one factor block."""
    a_c, b_c, c_t = _aggregated(f, op)
    if block == "A":
        return [FitTerm(views.t[1], views.mt[1], khatri_rao(c_t, f.B)),
                FitTerm(views.c[1], views.mc[1], khatri_rao(f.C, b_c),
                        agg=op.matrix_or_none(1), weight=weight)]
    if block == "B":
        return [FitTerm(views.t[2], views.mt[2], khatri_rao(c_t, f.A)),
                FitTerm(views.c[2], views.mc[2], khatri_rao(f.C, a_c),
                        agg=op.matrix_or_none(2), weight=weight)]
    return [FitTerm(views.t[3], views.mt[3], khatri_rao(f.B, f.A),
                    agg=op.matrix_or_none(3)),
            FitTerm(views.c[3], views.mc[3], khatri_rao(b_c, a_c), weight=weight)]


def coupled_gradients(y_t, mask_t, y_c, mask_c, op, f: Factors, weight: float = 1.0):
    """Gradients of the coupled objective with respect to A, B and C."""
    views = _Views(y_t, mask_t, y_c, mask_c)
    g_a = gradient(_terms("A", views, op, f, weight), f.A)
    g_b = gradient(_terms("B", views, op, f, weight), f.B)
    g_c = gradient(_terms("C", views, op, f, weight), f.C)
    return g_a, g_b, g_c


def prema_solve(y_t, mask_t, y_c, mask_c, op: AggregationOperator, cfg: PremaConfig,
                init: Factors = None):
    """Recover CPD factors of the fine tensor from its two coarse views.

    Returns ``(factors, report)``; the report holds the cost after every
    single-factor update, the step sizes, and any rank-bound warning.
    ``init`` overrides the CPD-based initialization (warm start).
    """
    t_start = time.perf_counter()
    y_t, mask_t, y_c, mask_c = _check_problem(y_t, mask_t, y_c, mask_c, op)
    report = SolverReport(solver="prema")
    bound = rank_bound(op.fine_dims, op)
    if cfg.rank > bound:
        report.warn(f"rank {cfg.rank} exceeds the recovery bound {bound}; "
                    "the solution may not be identifiable")
    if init is not None:
        f, branch = init.copy(), "warm-start"
    else:
        f, branch = prema_init(y_t, mask_t, y_c, mask_c, op, cfg.rank,
                               sweeps=cfg.init_sweeps, seed=cfg.seed)
    report.init_branch = branch
    views = _Views(y_t, mask_t, y_c, mask_c)
    current = {"A": f.A, "B": f.B, "C": f.C}
    prev_cost = None
    for it in range(1, cfg.max_iterations + 1):
        steps = []
        for block in ("A", "B", "C"):
            tic = time.perf_counter()
            fac = Factors(current["A"], current["B"], current["C"])
            terms = _terms(block, views, op, fac, cfg.coupling_weight)
            current[block], step, _, cost_after = line_update(current[block], terms)
            steps.append(step)
            report.add(it, block, cost_after, step, (time.perf_counter() - tic) * 1e3)
        report.iterations = it
        cost = report.rows[-1]["cost"]
        if all(s == 0.0 for s in steps):
            report.stationary = True
            break
        if (cfg.tolerance is not None and prev_cost is not None
                and prev_cost - cost <= cfg.tolerance * max(prev_cost, 1e-300)):
            break
        prev_cost = cost
    out = Factors(current["A"], current["B"], current["C"])
    report.final_cost = coupled_cost(y_t, mask_t, y_c, mask_c, op, out, cfg.coupling_weight)
    report.wall_ms = (time.perf_counter() - t_start) * 1e3
    return out, report


def disaggregate(f: Factors, dims) -> np.ndarray:
    """Fine-resolution tensor implied by recovered factors."""
    return reconstruct(f, dims)
