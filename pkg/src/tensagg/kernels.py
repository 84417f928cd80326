"""Shared solver kernels: Khatri-Rao products, masked gradients, exact line search.

Every block update in the coupled solvers minimizes a sum of masked
quadratic fit terms

    w * || mask * (L @ (M @ F)^T  -  Y) ||_F^2

over one factor ``F``, where ``L`` is a tall left matrix (a Khatri-Rao
product of the other factors), ``M`` an optional aggregation applied to
the factor being updated, and ``Y``/``mask`` a matching matricized view.
:class:`FitTerm` carries one such term with its left matrix computed once
and reused by both the gradient and the line-search direction, which keeps
the per-update cost at one Khatri-Rao evaluation per coupled term.

All residuals use the model-minus-data sign convention, so the step along
the negative gradient is ``max(0, sum e.g / sum g.g)`` with an optional
quadratic penalty contributing ``(e_reg, d_reg)`` terms.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "khatri_rao",
    "khatri_rao_count",
    "reset_khatri_rao_count",
    "KronPair",
    "FitTerm",
    "gradient",
    "directions",
    "exact_step",
    "line_costs",
    "line_update",
]

_kr_evals = 0

# denominator guard: a smaller curvature means a stationary direction
STEP_DENOM_FLOOR = 1e-300


def khatri_rao(m1: np.ndarray, m2: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product; column r is kron(m1[:, r], m2[:, r]).

    The second operand's row index runs fastest, matching the unfolding
    layout in :mod:`tensagg.core`.
    """
    global _kr_evals
    m1 = np.asarray(m1)
    m2 = np.asarray(m2)
    if m1.ndim != 2 or m2.ndim != 2 or m1.shape[1] != m2.shape[1]:
        raise ValueError(f"column counts must match, got {m1.shape} and {m2.shape}")
    _kr_evals += 1
    p, r = m1.shape
    q = m2.shape[0]
    return (m1[:, None, :] * m2[None, :, :]).reshape(p * q, r)


def khatri_rao_count() -> int:
    """Number of khatri_rao evaluations since the last reset (test instrumentation)."""
    return _kr_evals


def reset_khatri_rao_count():
    global _kr_evals
    _kr_evals = 0


class KronPair:
    """Matrix-free action of kron(V, U) on matrices with (U-fast, V-slow) row pairing.

    Rows of the operand index pairs ``(i, j)`` at flat position
    ``i + I*j`` (first index fastest), exactly the mode-3 unfolding row
    order, so ``KronPair(U, V) @ X3`` equals the mode-3 unfolding of the
    tensor aggregated by ``U`` in mode 1 and ``V`` in mode 2.
    """

    def __init__(self, u: np.ndarray, v: np.ndarray):
        self.u = np.asarray(u, dtype=np.float64)
        self.v = np.asarray(v, dtype=np.float64)
        self.shape = (self.u.shape[0] * self.v.shape[0],
                      self.u.shape[1] * self.v.shape[1])

    @property
    def T(self) -> "KronPair":
        return KronPair(self.u.T, self.v.T)

    def __matmul__(self, m: np.ndarray) -> np.ndarray:
        m = np.asarray(m)
        if m.shape[0] != self.shape[1]:
            raise ValueError(f"operand rows {m.shape[0]} != operator cols {self.shape[1]}")
        cols = m.shape[1] if m.ndim == 2 else 1
        cube = m.reshape(self.u.shape[1], self.v.shape[1], cols, order="F")
        out = np.einsum("pi,qj,ijr->pqr", self.u, self.v, cube, optimize=True)
        out = out.reshape(self.shape[0], cols, order="F")
        return out if m.ndim == 2 else out[:, 0]

    def dense(self) -> np.ndarray:
        return np.kron(self.v, self.u)


@dataclass
class FitTerm:
    """One masked quadratic fit term over the factor currently being updated.

    ``y`` and ``mask`` are P x Q matricizations, ``left`` is P x R, and the
    factor enters as ``left @ (agg @ F)^T`` (``agg=None`` means identity).
    ``resid`` is filled by :func:`gradient` and reused downstream.
    """

    y: np.ndarray
    mask: np.ndarray
    left: np.ndarray
    agg: object = None          # ndarray, KronPair, or None
    weight: float = 1.0
    resid: np.ndarray = field(default=None, repr=False)

    def model_cols(self, factor: np.ndarray) -> np.ndarray:
        return factor if self.agg is None else self.agg @ factor

    def residual(self, factor: np.ndarray) -> np.ndarray:
        fa = self.model_cols(factor)
        self.resid = self.mask * (self.left @ fa.T - self.y)
        return self.resid

    def cost(self, factor: np.ndarray) -> float:
        r = self.residual(factor)
        return self.weight * float(np.vdot(r, r))


def gradient(terms, factor: np.ndarray) -> np.ndarray:
    """Gradient of the summed fit terms with respect to ``factor``.

    Per term: 2 w M^T (E^T L) with E the masked model-minus-data residual.
    Residuals are stashed on the terms for reuse by :func:`directions`.
    """
    g = np.zeros_like(factor)
    for t in terms:
        e = t.residual(factor)
        contrib = 2.0 * t.weight * (e.T @ t.left)
        if t.agg is not None:
            contrib = t.agg.T @ contrib
        g += contrib
    return g


def directions(terms, grad: np.ndarray):
    """Masked directional derivatives of each term along the negative gradient.

    Per term: G = mask * (L @ (M @ grad)^T), reusing the stored left matrix.
    """
    out = []
    for t in terms:
        d = grad if t.agg is None else t.agg @ grad
        out.append(t.mask * (t.left @ d.T))
    return out


def exact_step(terms, dirs, reg=None) -> float:
    """Closed-form minimizer over step >= 0 of the cost along the negative gradient.

    ``reg`` is an optional ``(e, d, mu)`` triple for a quadratic penalty whose
    residual moves as ``e - step*d``.  Requires residuals stashed by
    :func:`gradient`.  Returns 0 on a stationary (zero-curvature) direction.
    """
    num = 0.0
    den = 0.0
    for t, g in zip(terms, dirs):
        num += t.weight * float(np.vdot(t.resid, g))
        den += t.weight * float(np.vdot(g, g))
    if reg is not None:
        e, d, mu = reg
        num += mu * float(np.dot(e, d))
        den += mu * float(np.dot(d, d))
    if den < STEP_DENOM_FLOOR:
        return 0.0
    return max(0.0, num / den)


def line_costs(terms, dirs, step: float, reg=None):
    """Fit cost at steps 0 and ``step`` along the line, from the stashed residuals.

    Exact for these quadratic terms: the residual at ``step`` is
    ``E - step*G`` (and ``e - step*d`` for the penalty).
    """
    c0 = 0.0
    c1 = 0.0
    for t, g in zip(terms, dirs):
        c0 += t.weight * float(np.vdot(t.resid, t.resid))
        moved = t.resid - step * g
        c1 += t.weight * float(np.vdot(moved, moved))
    if reg is not None:
        e, d, mu = reg
        c0 += mu * float(np.dot(e, e))
        moved = e - step * d
        c1 += mu * float(np.dot(moved, moved))
    return c0, c1


def line_update(factor: np.ndarray, terms, reg_fn=None):
    """One exact-line-search descent update of ``factor`` against ``terms``.

    ``reg_fn``, if given, maps the computed gradient to a penalty triple
    ``(e, d, mu)`` in the ``e - step*d`` convention.  Returns
    ``(new_factor, step, cost_before, cost_after)`` where the costs cover
    the given terms (plus penalty) only.
    """
    grad = gradient(terms, factor)
    dirs = directions(terms, grad)
    reg = None if reg_fn is None else reg_fn(grad)
    step = exact_step(terms, dirs, reg)
    c0, c1 = line_costs(terms, dirs, step, reg)
    return factor - step * grad, step, c0, c1
