#!/usr/bin/env python3
# Sweep aggregation levels and compare solvers; writes nde_sweep.svg next
# to this script.  Coarser views (wider windows, bigger groups) starve the
# linear baselines while the coupled low-rank model keeps recovering.

import os

from tensagg import BenchmarkInstance, ScenarioSpec, run_benchmark
from tensagg.evaluation import plot_benchmark, rows_to_csv

levels = [("w2-g2", 2, 2), ("w4-g4", 4, 4), ("w8-g6", 8, 6)]
instances = [
    BenchmarkInstance(name, (24, 12, 48), rank=3,
                      spec=ScenarioSpec(scenario="A", window=w,
                                        group_size_1=g, seed=0))
    for name, w, g in levels
]

rows = run_benchmark(instances, [("prema", {"iterations": 200}),
                                 ("bprema", {"iterations": 200}),
                                 "mean",
                                 ("cmtf", {"iterations": 200})])

print(rows_to_csv(rows))
out = os.path.join(os.path.dirname(os.path.abspath(__file__)), "nde_sweep.svg")
plot_benchmark(rows, out)
print("wrote", out)
