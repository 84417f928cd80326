"""tensagg: recover fine-resolution 3-way tensors from coarse aggregated views."""

import os

# Honor the thread cap before any BLAS-backed import happens.
_threads = os.environ.get("TENSAGG_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                 "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)
del os, _threads

from .aggregation import (AggregationOperator, ScenarioSpec, aggregate_views,
                          build_partition_operator, contiguous_windows,
                          identity_operator, rank_bound, scenario_operator)
from .baselines import (cmtf_baseline, cmtf_solve, cpd_oracle, ls_baseline,
                        mean_baseline)
from .bprema import BlindFactors, BPremaConfig, bprema_init, bprema_solve
from .core import (Factors, as_mask, as_tensor, fold, masked_residual,
                   mode_product, reconstruct, unfold)
from .cpd import cpd_als, prema_init, solve_third_factor
from .evaluation import (BenchmarkInstance, make_synthetic, match_factors, nde,
                         run_benchmark)
from .kernels import khatri_rao
from .prema import PremaConfig, disaggregate, prema_solve
from .report import SolverReport

__version__ = "0.1.0"

__all__ = [
    "AggregationOperator", "ScenarioSpec", "aggregate_views",
    "build_partition_operator", "contiguous_windows", "identity_operator",
    "rank_bound", "scenario_operator",
    "cmtf_baseline", "cmtf_solve", "cpd_oracle", "ls_baseline", "mean_baseline",
    "BlindFactors", "BPremaConfig", "bprema_init", "bprema_solve",
    "Factors", "as_mask", "as_tensor", "fold", "masked_residual",
    "mode_product", "reconstruct", "unfold",
    "cpd_als", "prema_init", "solve_third_factor",
    "BenchmarkInstance", "make_synthetic", "match_factors", "nde", "run_benchmark",
    "khatri_rao",
    "PremaConfig", "disaggregate", "prema_solve",
    "SolverReport",
]
