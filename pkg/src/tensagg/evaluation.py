"""Metrics, factor alignment, synthetic problems, and the benchmark harness."""

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from .aggregation import ScenarioSpec, aggregate_views, scenario_operator
from .core import Factors, frob2, reconstruct

__all__ = ["nde", "match_factors", "SyntheticProblem", "make_synthetic",
           "BenchmarkInstance", "run_benchmark", "rows_to_csv", "plot_benchmark"]


def nde(truth, estimate) -> float:
    """Normalized disaggregation error: ||X - Xhat||_F^2 / ||X||_F^2."""
    truth = np.asarray(truth, dtype=np.float64)
    estimate = np.asarray(estimate, dtype=np.float64)
    if truth.shape != estimate.shape:
        raise ValueError(f"shape mismatch: {truth.shape} vs {estimate.shape}")
    denom = frob2(truth)
    if denom == 0.0:
        raise ValueError("ground truth has zero norm")
    return frob2(truth - estimate) / denom


def _column_correlations(m1, m2):
    n1 = np.linalg.norm(m1, axis=0)
    n2 = np.linalg.norm(m2, axis=0)
    scale = np.outer(n1, n2)
    scale[scale == 0] = 1.0
    return (m1.T @ m2) / scale


def match_factors(f1: Factors, f2: Factors):
    """Align ``f2`` to ``f1`` up to common column permutation and scaling.

    Columns are paired greedily by the product of per-factor normalized
    correlations; each matched column of ``f2`` gets a per-factor scale
    triple constrained to product 1.  Returns ``(perm, scales, residual)``
    where ``perm[r]`` is the ``f2`` column matched to column r of ``f1``,
    ``scales`` is R x 3, and ``residual`` is the relative Frobenius
    mismatch of the aligned factors.
    """
    if f1.rank != f2.rank or f1.dims != f2.dims:
        raise ValueError(f"factor shapes differ: {f1.dims} rank {f1.rank} vs "
                         f"{f2.dims} rank {f2.rank}")
    r = f1.rank
    score = np.abs(_column_correlations(f1.A, f2.A)
                   * _column_correlations(f1.B, f2.B)
                   * _column_correlations(f1.C, f2.C))
    perm = np.full(r, -1)
    used_rows = np.zeros(r, dtype=bool)
    used_cols = np.zeros(r, dtype=bool)
    work = score.copy()
    for _ in range(r):
        idx = np.unravel_index(np.argmax(np.where(used_rows[:, None] | used_cols[None, :],
                                                  -1.0, work)), work.shape)
        perm[idx[0]] = idx[1]
        used_rows[idx[0]] = True
        used_cols[idx[1]] = True

    scales = np.ones((r, 3))
    num = 0.0
    den = 0.0
    for r1 in range(r):
        r2 = perm[r1]
        triple = []
        for m1, m2 in ((f1.A, f2.A), (f1.B, f2.B), (f1.C, f2.C)):
            sq = float(m2[:, r2] @ m2[:, r2])
            triple.append(float(m1[:, r1] @ m2[:, r2]) / sq if sq > 0 else 0.0)
        prod = triple[0] * triple[1] * triple[2]
        if prod != 0.0:
            # renormalize so the scale triple multiplies to exactly 1
            root = np.cbrt(prod)
            triple = [s / root for s in triple]
        scales[r1] = triple
        for axis, (m1, m2) in enumerate(((f1.A, f2.A), (f1.B, f2.B), (f1.C, f2.C))):
            diff = m2[:, r2] * scales[r1, axis] - m1[:, r1]
            num += float(diff @ diff)
            den += float(m1[:, r1] @ m1[:, r1])
    residual = np.sqrt(num / den) if den > 0 else 0.0
    return perm, scales, residual


@dataclass
class SyntheticProblem:
    """Ground truth plus its two aggregated views and everything needed to solve."""

    x: np.ndarray
    factors: Factors
    y_t: np.ndarray
    mask_t: np.ndarray
    y_c: np.ndarray
    mask_c: np.ndarray
    op: object
    spec: ScenarioSpec
    rank: int


def make_synthetic(dims, rank: int, spec: ScenarioSpec, noise: float = 0.0,
                   factor_rv: str = "normal", kind: str = "sum",
                   slab_floor: int = 0) -> SyntheticProblem:
    """Seeded random low-rank ground truth with its two coarse views.

    Factors are i.i.d. standard normal (or uniform(-1, 1)); optional
    Gaussian noise with standard deviation ``noise * rms(view)`` is added
    to the observed view entries.
    """
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 1]))
    if factor_rv == "normal":
        draw = lambda n: rng.standard_normal((n, rank))
    elif factor_rv == "uniform":
        draw = lambda n: rng.uniform(-1.0, 1.0, size=(n, rank))
    else:
        raise ValueError(f"unknown factor distribution {factor_rv!r}")
    factors = Factors(*(draw(n) for n in dims))
    x = reconstruct(factors)
    op = scenario_operator(dims, spec, kind=kind)
    y_t, mask_t, y_c, mask_c = aggregate_views(x, op, spec, slab_floor=slab_floor)
    if noise > 0.0:
        nrng = np.random.default_rng(np.random.SeedSequence([spec.seed, 2]))
        for view, mask in ((y_t, mask_t), (y_c, mask_c)):
            sigma = noise * np.sqrt(frob2(view) / max(mask.sum(), 1.0))
            view += sigma * nrng.standard_normal(view.shape) * mask
    return SyntheticProblem(x, factors, y_t, mask_t, y_c, mask_c, op, spec, rank)


@dataclass
class BenchmarkInstance:
    name: str
    dims: tuple
    rank: int
    spec: ScenarioSpec
    noise: float = 0.0
    slab_floor: int = 0
    kind: str = "sum"

    def build(self) -> SyntheticProblem:
        return make_synthetic(self.dims, self.rank, self.spec, noise=self.noise,
                              kind=self.kind, slab_floor=self.slab_floor)


def _run_solver(name, problem: SyntheticProblem, options):
    """Dispatch one solver/baseline on one instance; returns (estimate, iterations)."""
    from . import baselines, bprema, prema

    opts = dict(options or {})
    rank = int(opts.pop("rank", problem.rank))
    iters = int(opts.pop("iterations", 200))
    seed = opts.pop("seed", problem.spec.seed)
    if name == "prema":
        cfg = prema.PremaConfig(rank=rank, max_iterations=iters, seed=seed, **opts)
        f, rep = prema.prema_solve(problem.y_t, problem.mask_t, problem.y_c,
                                   problem.mask_c, problem.op, cfg)
        return reconstruct(f), rep.iterations
    if name == "bprema":
        cfg = bprema.BPremaConfig(rank=rank, max_iterations=iters, seed=seed, **opts)
        f, rep = bprema.bprema_solve(problem.y_t, problem.mask_t, problem.y_c,
                                     problem.mask_c, cfg)
        return reconstruct(f.fine()), rep.iterations
    if name == "mean":
        return baselines.mean_baseline(problem.y_t, problem.mask_t, problem.y_c,
                                       problem.mask_c, problem.op), 1
    if name == "ls":
        return baselines.ls_baseline(problem.y_t, problem.mask_t, problem.y_c,
                                     problem.mask_c, problem.op,
                                     cg_iterations=iters), iters
    if name == "cmtf":
        return baselines.cmtf_baseline(problem.y_t, problem.mask_t, problem.y_c,
                                       problem.mask_c, problem.op, rank,
                                       iterations=iters), iters
    if name == "cpd-oracle":
        full = np.ones_like(problem.x)
        return baselines.cpd_oracle(problem.x, full, rank, sweeps=min(iters, 50),
                                    seed=seed), min(iters, 50)
    raise ValueError(f"unknown solver {name!r}; valid names: "
                     "prema, bprema, mean, ls, cmtf, cpd-oracle")


def run_benchmark(instances, solvers):
    """Sweep instances x solvers; one result row per pair.

    ``solvers`` is a sequence of names or (name, options) pairs.  Failures
    become rows with ``status='error'`` instead of aborting the sweep.
    Rows come back sorted by (instance, solver).
    """
    rows = []
    for inst in instances:
        problem = inst.build()
        for entry in solvers:
            name, options = entry if isinstance(entry, tuple) else (entry, None)
            row = {"instance": inst.name, "solver": name,
                   "rank": (options or {}).get("rank", inst.rank),
                   "nde": "", "iterations": "", "wall_ms": "", "status": "ok"}
            tic = time.perf_counter()
            try:
                estimate, iters = _run_solver(name, problem, options)
                row["nde"] = nde(problem.x, estimate)
                row["iterations"] = iters
            except Exception as exc:   # noqa: BLE001 - suite must survive bad runs
                row["status"] = f"error: {exc}"
            row["wall_ms"] = (time.perf_counter() - tic) * 1e3
            rows.append(row)
    rows.sort(key=lambda r: (r["instance"], r["solver"]))
    return rows


def rows_to_csv(rows, path=None) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["instance", "solver", "rank", "nde",
                                             "iterations", "wall_ms", "status"],
                            lineterminator="\n")
    writer.writeheader()
    for row in rows:
        out = dict(row)
        if isinstance(out["nde"], float):
            out["nde"] = repr(out["nde"])
        if isinstance(out["wall_ms"], float):
            out["wall_ms"] = f"{out['wall_ms']:.3f}"
        writer.writerow(out)
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def plot_benchmark(rows, path):
    """Line plot of NDE per solver across instances, written as SVG."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    instances = sorted({r["instance"] for r in rows})
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for solver in sorted({r["solver"] for r in rows}):
        ys = []
        for inst in instances:
            vals = [r["nde"] for r in rows
                    if r["instance"] == inst and r["solver"] == solver
                    and isinstance(r["nde"], float)]
            ys.append(vals[0] if vals else np.nan)
        ax.plot(instances, ys, marker="o", label=solver)
    ax.set_xlabel("instance")
    ax.set_ylabel("NDE")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
