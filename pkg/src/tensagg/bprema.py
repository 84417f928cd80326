"""Blind disaggregation: the aggregation matrices are unknown.

The aggregated factors are treated as free variables, giving the
five-block objective

    L(A, Ahat, B, C, Chat) = ||mask_t * (Y_t - [[A, B, Chat]])||_F^2
                           + ||mask_c * (Y_c - [[Ahat, B, C]])||_F^2
                           + mu * ||colsum(C) - colsum(Chat)||_2^2

where the column-sum penalty pins the scaling ambiguity between the two
tensors (a non-overlapping full-coverage temporal aggregation preserves
column sums).  Each view must be aggregated in a single mode: Y_t is
I x J x K_w, Y_c is I_u x J x K with shared J.
"""

import time
from dataclasses import dataclass

import numpy as np

from .core import Factors, as_mask, as_tensor, reconstruct, unfold
from .cpd import cpd_als, solve_third_factor
from .kernels import FitTerm, directions, exact_step, gradient, khatri_rao
from .report import SolverReport

__all__ = ["BPremaConfig", "BlindFactors", "bprema_init", "bprema_solve",
           "blind_cost", "blind_gradients", "window_row_sums"]


@dataclass
class BPremaConfig:
    rank: int = 5
    mu: float = 100.0
    max_iterations: int = 10
    init_sweeps: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if self.mu < 0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")


@dataclass
class BlindFactors:
    """Fine factors (A, B, C) plus the free aggregated copies.

    ``A_agg`` stands in for the mode-1-aggregated A seen by the
    contemporaneous view; ``C_agg`` for the mode-3-aggregated C seen by
    the temporal view.  B is shared by both views.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    A_agg: np.ndarray
    C_agg: np.ndarray

    def __post_init__(self):
        ranks = {m.shape[1] for m in (self.A, self.B, self.C, self.A_agg, self.C_agg)}
        if len(ranks) != 1:
            raise ValueError("all five factors must share one column count")

    @property
    def rank(self) -> int:
        return self.A.shape[1]

    def fine(self) -> Factors:
        return Factors(self.A, self.B, self.C)

    def colsum_gap(self) -> float:
        return float(np.linalg.norm(self.C.sum(axis=0) - self.C_agg.sum(axis=0)))


def _check_views(y_t, mask_t, y_c, mask_c):
    y_t = as_tensor(y_t)
    y_c = as_tensor(y_c)
    mask_t = as_mask(mask_t, y_t.shape)
    mask_c = as_mask(mask_c, y_c.shape)
    if y_t.shape[1] != y_c.shape[1]:
        raise ValueError(f"views must share the middle mode, got {y_t.shape} and {y_c.shape}")
    if y_t.shape[2] > y_c.shape[2]:
        raise ValueError("temporal view must be the mode-3-aggregated one "
                         f"(K_w={y_t.shape[2]} > K={y_c.shape[2]})")
    if y_c.shape[0] > y_t.shape[0]:
        raise ValueError("contemporaneous view must be the mode-1-aggregated one "
                         f"(I_u={y_c.shape[0]} > I={y_t.shape[0]})")
    return y_t, mask_t, y_c, mask_c


def window_row_sums(m: np.ndarray, windows: int) -> np.ndarray:
    """Sum consecutive row blocks of ``m`` into ``windows`` rows.

    Uses floor-width blocks with the remainder absorbed by the last one,
    e.g. 50 rows into 12 windows gives 11 blocks of 4 plus one of 6.
    """
    k = m.shape[0]
    if not 1 <= windows <= k:
        raise ValueError(f"cannot form {windows} windows from {k} rows")
    width = k // windows
    out = np.empty((windows, m.shape[1]))
    for g in range(windows):
        lo = g * width
        hi = lo + width if g < windows - 1 else k
        out[g] = m[lo:hi].sum(axis=0)
    return out


def bprema_init(y_t, mask_t, y_c, mask_c, cfg: BPremaConfig) -> BlindFactors:
    """Seed the five blocks: CPD on the zero-filled contemporaneous view,
    window sums of C for the aggregated copy, and a masked solve for A."""
    y_t, mask_t, y_c, mask_c = _check_views(y_t, mask_t, y_c, mask_c)
    g = cpd_als(y_c * mask_c, np.ones_like(y_c), cfg.rank,
                iterations=cfg.init_sweeps, seed=cfg.seed)
    a_agg, b, c = g.A, g.B, g.C
    c_agg = window_row_sums(c, y_t.shape[2])
    a = solve_third_factor(y_t, mask_t, khatri_rao(c_agg, b), mode=1)
    return BlindFactors(a, b, c, a_agg, c_agg)


def blind_cost(y_t, mask_t, y_c, mask_c, f: BlindFactors, mu: float) -> float:
    """Value of the blind objective, penalty included."""
    r_t = mask_t * (reconstruct(Factors(f.A, f.B, f.C_agg)) - y_t)
    r_c = mask_c * (reconstruct(Factors(f.A_agg, f.B, f.C)) - y_c)
    return (float(np.vdot(r_t, r_t)) + float(np.vdot(r_c, r_c))
            + mu * f.colsum_gap() ** 2)


def blind_gradients(y_t, mask_t, y_c, mask_c, f: BlindFactors, mu: float) -> dict:
    """Gradients of the blind objective for all five blocks, penalty included."""
    ut = {m: unfold(y_t, m) for m in (1, 2, 3)}
    umt = {m: unfold(mask_t, m) for m in (1, 2, 3)}
    uc = {m: unfold(y_c, m) for m in (1, 2, 3)}
    umc = {m: unfold(mask_c, m) for m in (1, 2, 3)}
    gap = f.C.sum(axis=0) - f.C_agg.sum(axis=0)
    return {
        "A": gradient([FitTerm(ut[1], umt[1], khatri_rao(f.C_agg, f.B))], f.A),
        "A_agg": gradient([FitTerm(uc[1], umc[1], khatri_rao(f.C, f.B))], f.A_agg),
        "B": gradient([FitTerm(ut[2], umt[2], khatri_rao(f.C_agg, f.A)),
                       FitTerm(uc[2], umc[2], khatri_rao(f.C, f.A_agg))], f.B),
        "C": gradient([FitTerm(uc[3], umc[3], khatri_rao(f.B, f.A_agg))], f.C)
             + 2.0 * mu * gap[None, :],
        "C_agg": gradient([FitTerm(ut[3], umt[3], khatri_rao(f.B, f.A))], f.C_agg)
                 - 2.0 * mu * gap[None, :],
    }


def bprema_solve(y_t, mask_t, y_c, mask_c, cfg: BPremaConfig):
    """Five-block coordinate descent on the blind objective.

    Returns ``(BlindFactors, SolverReport)``; the report rows carry the
    running column-sum gap in the ``colsum_gap`` column and the total
    objective (penalty included) in ``cost``.
    """
    t_start = time.perf_counter()
    y_t, mask_t, y_c, mask_c = _check_views(y_t, mask_t, y_c, mask_c)
    report = SolverReport(solver="bprema", extra_columns=("colsum_gap",))
    f = bprema_init(y_t, mask_t, y_c, mask_c, cfg)
    ut = {m: unfold(y_t, m) for m in (1, 2, 3)}
    umt = {m: unfold(mask_t, m) for m in (1, 2, 3)}
    uc = {m: unfold(y_c, m) for m in (1, 2, 3)}
    umc = {m: unfold(mask_c, m) for m in (1, 2, 3)}
    mu = cfg.mu

    # track the three cost pieces so every row reports the full objective
    cost_t = _masked_cost(ut[3], umt[3], khatri_rao(f.B, f.A), f.C_agg)
    cost_c = _masked_cost(uc[3], umc[3], khatri_rao(f.B, f.A_agg), f.C)

    for it in range(1, cfg.max_iterations + 1):
        steps = []

        def record(block, step, elapsed):
            steps.append(step)
            total = cost_t + cost_c + mu * f.colsum_gap() ** 2
            report.add(it, block, total, step, elapsed, colsum_gap=f.colsum_gap())

        tic = time.perf_counter()
        terms = [FitTerm(ut[1], umt[1], khatri_rao(f.C_agg, f.B))]
        f.A, step, cost_t = _plain_update(f.A, terms)
        record("A", step, (time.perf_counter() - tic) * 1e3)

        tic = time.perf_counter()
        terms = [FitTerm(uc[1], umc[1], khatri_rao(f.C, f.B))]
        f.A_agg, step, cost_c = _plain_update(f.A_agg, terms)
        record("A_agg", step, (time.perf_counter() - tic) * 1e3)

        tic = time.perf_counter()
        terms = [FitTerm(ut[2], umt[2], khatri_rao(f.C_agg, f.A)),
                 FitTerm(uc[2], umc[2], khatri_rao(f.C, f.A_agg))]
        f.B, step, (cost_t, cost_c) = _plain_update_multi(f.B, terms)
        record("B", step, (time.perf_counter() - tic) * 1e3)

        tic = time.perf_counter()
        terms = [FitTerm(uc[3], umc[3], khatri_rao(f.B, f.A_agg))]
        f.C, step, cost_c = _penalized_update(f.C, terms, f.C, f.C_agg, mu, sign=+1.0)
        record("C", step, (time.perf_counter() - tic) * 1e3)

        tic = time.perf_counter()
        terms = [FitTerm(ut[3], umt[3], khatri_rao(f.B, f.A))]
        f.C_agg, step, cost_t = _penalized_update(f.C_agg, terms, f.C, f.C_agg, mu, sign=-1.0)
        record("C_agg", step, (time.perf_counter() - tic) * 1e3)

        report.iterations = it
        if all(s == 0.0 for s in steps):
            report.stationary = True
            break

    report.final_cost = blind_cost(y_t, mask_t, y_c, mask_c, f, mu)
    report.wall_ms = (time.perf_counter() - t_start) * 1e3
    return f, report


def _masked_cost(y, mask, left, factor):
    r = mask * (left @ factor.T - y)
    return float(np.vdot(r, r))


def _post_cost(term, direction, step):
    moved = term.resid - step * direction
    return term.weight * float(np.vdot(moved, moved))


def _plain_update(x, terms):
    g = gradient(terms, x)
    dirs = directions(terms, g)
    step = exact_step(terms, dirs)
    return x - step * g, step, _post_cost(terms[0], dirs[0], step)


def _plain_update_multi(x, terms):
    g = gradient(terms, x)
    dirs = directions(terms, g)
    step = exact_step(terms, dirs)
    costs = tuple(_post_cost(t, d, step) for t, d in zip(terms, dirs))
    return x - step * g, step, costs


def _penalized_update(x, terms, c, c_agg, mu, sign):
    """Update C (sign=+1) or its aggregated copy (sign=-1) with the
    column-sum penalty folded into the gradient and the step."""
    gap = c.sum(axis=0) - c_agg.sum(axis=0)
    g = gradient(terms, x) + sign * 2.0 * mu * gap[None, :]
    dirs = directions(terms, g)
    # penalty residual moves as gap - step * d along the update
    d = sign * g.sum(axis=0)
    step = exact_step(terms, dirs, reg=(gap, d, mu))
    return x - step * g, step, _post_cost(terms[0], dirs[0], step)
