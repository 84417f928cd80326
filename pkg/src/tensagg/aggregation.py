"""Aggregation operators, view generation, and the identifiability rank bound.

A coarse view is a mode product of the fine tensor by a fat row-structured
matrix: each row of the matrix sums (or averages) the slabs belonging to
one group.  ``AggregationOperator`` bundles the three per-mode matrices
with their kind metadata; identity modes are materialized but flagged so
solvers can skip the multiply.
"""

from dataclasses import dataclass

import numpy as np

from .core import as_tensor, mode_product

__all__ = [
    "AggregationOperator",
    "ScenarioSpec",
    "build_partition_operator",
    "contiguous_windows",
    "identity_operator",
    "scenario_operator",
    "aggregate_views",
    "sample_mask",
    "rank_bound",
]

KINDS = ("sum", "average", "identity")


def build_partition_operator(n: int, groups, kind: str = "sum") -> np.ndarray:
    """Row-structured aggregation matrix over ``n`` atoms.

    ``groups`` is a sequence of index collections (0-based).  Row g carries
    1 (kind ``sum``) or 1/len(group) (kind ``average``) at its member
    columns.  Groups may overlap; atoms in no group give zero columns
    (gaps in the timeline).
    """
    if kind not in ("sum", "average"):
        raise ValueError(f"kind must be 'sum' or 'average', got {kind!r}")
    m = np.zeros((len(groups), n))
    for g, members in enumerate(groups):
        members = list(members)
        if not members:
            raise ValueError(f"group {g} is empty")
        for idx in members:
            if not 0 <= idx < n:
                raise ValueError(f"group {g} index {idx} out of range for n={n}")
        m[g, members] = 1.0 if kind == "sum" else 1.0 / len(members)
    return m


def contiguous_windows(n: int, width: int):
    """Non-overlapping index windows of ``width``, trailing shorter window if needed."""
    if width < 1:
        raise ValueError(f"window width must be >= 1, got {width}")
    return [range(s, min(s + width, n)) for s in range(0, n, width)]


def identity_operator(n: int) -> np.ndarray:
    return np.eye(n)


@dataclass
class AggregationOperator:
    """The (U, V, W) triple: mode-1, mode-2 and mode-3 aggregation matrices."""

    U: np.ndarray
    V: np.ndarray
    W: np.ndarray
    kinds: tuple = ("sum", "sum", "sum")
    overlaps: tuple = (False, False, False)

    def __post_init__(self):
        self.U = np.asarray(self.U, dtype=np.float64)
        self.V = np.asarray(self.V, dtype=np.float64)
        self.W = np.asarray(self.W, dtype=np.float64)
        for name, m, kind, overlap in zip("UVW", (self.U, self.V, self.W),
                                          self.kinds, self.overlaps):
            if kind not in KINDS:
                raise ValueError(f"unknown kind {kind!r} for {name}")
            if m.shape[0] > m.shape[1]:
                raise ValueError(f"{name} must have at most as many rows as columns, "
                                 f"got {m.shape}")
            if kind == "identity" and not np.array_equal(m, np.eye(m.shape[1])):
                raise ValueError(f"{name} flagged identity but is not the identity matrix")
            if kind != "identity":
                if np.any(m < 0):
                    raise ValueError(f"{name} has negative entries")
                if kind == "sum" and not np.all((m == 0) | (m == 1)):
                    raise ValueError(f"sum-kind {name} must be 0/1")
                if kind == "average":
                    rows = m.sum(axis=1)
                    if not np.allclose(rows, 1.0):
                        raise ValueError(f"average-kind {name} rows must sum to 1")
                if not overlap and np.any((m > 0).sum(axis=0) > 1):
                    raise ValueError(f"{name} has overlapping groups but overlap flag is off")

    @property
    def fine_dims(self) -> tuple:
        return (self.U.shape[1], self.V.shape[1], self.W.shape[1])

    @property
    def coarse_dims(self) -> tuple:
        return (self.U.shape[0], self.V.shape[0], self.W.shape[0])

    def is_identity(self, mode: int) -> bool:
        return self.kinds[mode - 1] == "identity"

    def matrix_or_none(self, mode: int):
        """The per-mode matrix, or None when it is the identity (solver fast path)."""
        if self.is_identity(mode):
            return None
        return (self.U, self.V, self.W)[mode - 1]


@dataclass
class ScenarioSpec:
    """Configuration for generating the two coarse views of a fine tensor.

    Scenario A aggregates mode 3 (temporal view) and mode 1
    (contemporaneous view); Scenario B additionally aggregates mode 2 in
    the contemporaneous view.  ``missing_t``/``missing_c`` are per-view
    missing-entry rates on the aggregates.
    """

    scenario: str = "A"
    window: int = 4
    group_size_1: int = 4
    group_size_2: int = 1
    missing_t: float = 0.0
    missing_c: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.scenario not in ("A", "B"):
            raise ValueError(f"scenario must be 'A' or 'B', got {self.scenario!r}")
        if self.scenario == "A" and self.group_size_2 != 1:
            raise ValueError("Scenario A forces an identity mode-2 operator")
        for rate in (self.missing_t, self.missing_c):
            if not 0.0 <= rate < 1.0:
                raise ValueError(f"missing rates must lie in [0, 1), got {rate}")


def scenario_operator(dims, spec: ScenarioSpec, kind: str = "sum") -> AggregationOperator:
    """Build the (U, V, W) triple implied by a scenario spec for the given fine dims."""
    i, j, k = dims
    u = build_partition_operator(i, contiguous_windows(i, spec.group_size_1), kind)
    w = build_partition_operator(k, contiguous_windows(k, spec.window), kind)
    if spec.scenario == "B" and spec.group_size_2 > 1:
        v = build_partition_operator(j, contiguous_windows(j, spec.group_size_2), kind)
        v_kind = kind
    else:
        v = identity_operator(j)
        v_kind = "identity"
    return AggregationOperator(u, v, w, kinds=(kind, v_kind, kind))


def sample_mask(dims, missing_rate: float, rng, slab_floor: int = 0) -> np.ndarray:
    """Seeded 0/1 mask with the given missing rate.

    When ``slab_floor`` > 0, every frontal slab (fixed third index) is
    topped up to at least that many observed entries; raises when the
    floor exceeds the slab size.
    """
    i, j, k = dims
    if slab_floor > i * j:
        raise ValueError(f"slab floor {slab_floor} exceeds slab size {i * j}")
    mask = (rng.random(dims) >= missing_rate).astype(np.float64)
    if slab_floor > 0:
        for s in range(k):
            slab = mask[:, :, s]
            short = slab_floor - int(slab.sum())
            if short > 0:
                off = np.flatnonzero(slab.ravel() == 0.0)
                picks = rng.choice(off, size=short, replace=False)
                rows, cols = np.unravel_index(picks, slab.shape)
                mask[rows, cols, s] = 1.0
    return mask


def aggregate_views(x: np.ndarray, op: AggregationOperator, spec: ScenarioSpec,
                    slab_floor: int = 0):
    """Generate the temporal and contemporaneous views of ``x`` with sampled masks.

    Returns ``(y_t, mask_t, y_c, mask_c)``.  Values under zero mask bits
    are stored as 0.  The mask draw is fully determined by ``spec.seed``.
    """
    x = as_tensor(x)
    if op.fine_dims != x.shape:
        raise ValueError(f"operator fine dims {op.fine_dims} do not match tensor {x.shape}")
    y_t = mode_product(x, op.W, 3)
    y_c = mode_product(x, op.U, 1)
    if not op.is_identity(2):
        y_c = mode_product(y_c, op.V, 2)
    rng = np.random.default_rng(spec.seed)
    mask_t = sample_mask(y_t.shape, spec.missing_t, rng)
    mask_c = sample_mask(y_c.shape, spec.missing_c, rng, slab_floor=slab_floor)
    return y_t * mask_t, mask_t, y_c * mask_c, mask_c


def rank_bound(dims, op: AggregationOperator) -> int:
    """Largest rank for which recovery from the two views is guaranteed generically.

    Evaluates floor((1/16) * min(I*J, I*K_w, J*K_w, 16*I_u*J_v)) from the
    fine dims and the operator's coarse dims.  Solvers warn when asked for
    a larger rank but still run.
    """
    i, j, _ = dims
    i_u, j_v, k_w = op.coarse_dims
    return int(np.floor(min(i * j, i * k_w, j * k_w, 16 * i_u * j_v) / 16.0))
