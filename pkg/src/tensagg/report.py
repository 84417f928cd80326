"""Per-iteration solver trace with CSV serialization."""

import csv
import io
from dataclasses import dataclass, field

__all__ = ["SolverReport"]


@dataclass
class SolverReport:
    """Cost/step trace of a block-coordinate solve plus summary fields.

    One row is appended after every single-factor update; ``extra`` holds
    optional per-row columns (e.g. the blind solver's column-sum gap).
    """

    solver: str = ""
    rows: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    init_branch: str = ""
    iterations: int = 0
    final_cost: float = float("nan")
    nde: float = None
    wall_ms: float = 0.0
    stationary: bool = False
    extra_columns: tuple = ()

    def add(self, iteration, block, cost, step, elapsed_ms, **extra):
        self.rows.append({"iteration": iteration, "block": block, "cost": cost,
                          "step": step, "elapsed_ms": elapsed_ms, **extra})

    def warn(self, message: str):
        self.warnings.append(message)

    def costs(self):
        return [r["cost"] for r in self.rows]

    def header(self):
        return ("iteration", "block", "cost", "step", "elapsed_ms") + tuple(self.extra_columns)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header())
        for r in self.rows:
            writer.writerow([r["iteration"], r["block"], repr(r["cost"]), repr(r["step"]),
                             f"{r['elapsed_ms']:.3f}"]
                            + [repr(r.get(c, "")) for c in self.extra_columns])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def summary(self) -> dict:
        out = {"solver": self.solver, "final_cost": self.final_cost,
               "iterations": self.iterations, "wall_ms": self.wall_ms,
               "stationary": self.stationary}
        if self.nde is not None:
            out["nde"] = self.nde
        if self.init_branch:
            out["init_branch"] = self.init_branch
        if self.warnings:
            out["warnings"] = list(self.warnings)
        return out
