"""Dense 3-way tensor algebra: unfoldings, mode products, low-rank reconstruction.

Tensors are plain float64 ``numpy`` arrays of shape ``(I, J, K)``.  All
matricizations use the first-index-fastest layout: the tensor entry
``(i, j, k)`` sits at flat position ``i + I*j + I*J*k``, so mode
unfoldings are Fortran-order reshapes.  Under that convention the three
unfoldings of a rank-R tensor with factors ``A`` (I x R), ``B`` (J x R),
``C`` (K x R) factorize as

    mode 1:  (JK x I)  =  (C kr B) A^T
    mode 2:  (IK x J)  =  (C kr A) B^T
    mode 3:  (IJ x K)  =  (B kr A) C^T

where ``kr`` is the column-wise Kronecker (Khatri-Rao) product with the
second operand's index running fastest.

Missing data is carried exclusively by 0/1 mask arrays of the same shape;
a value under a zero mask bit is stored as 0.  All arithmetic is float64.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Factors",
    "as_tensor",
    "as_mask",
    "unfold",
    "fold",
    "mode_product",
    "reconstruct",
    "masked_residual",
    "frob2",
]


def as_tensor(values) -> np.ndarray:
    """Validate and return a dense 3-way float64 tensor.

    Raises ValueError on wrong dimensionality or non-finite entries.
    """
    t = np.asarray(values, dtype=np.float64)
    if t.ndim != 3:
        raise ValueError(f"expected a 3-way array, got ndim={t.ndim}")
    if min(t.shape) < 1:
        raise ValueError(f"all dims must be >= 1, got {t.shape}")
    if not np.all(np.isfinite(t)):
        raise ValueError("tensor entries must be finite; encode missing data via a mask")
    return t


def as_mask(bits, dims=None) -> np.ndarray:
    """Validate a 0/1 observation mask, optionally against expected dims."""
    m = np.asarray(bits, dtype=np.float64)
    if m.ndim != 3:
        raise ValueError(f"expected a 3-way mask, got ndim={m.ndim}")
    if dims is not None and m.shape != tuple(dims):
        raise ValueError(f"mask dims {m.shape} do not match tensor dims {tuple(dims)}")
    if not np.all((m == 0.0) | (m == 1.0)):
        raise ValueError("mask entries must be exactly 0 or 1")
    return m


@dataclass
class Factors:
    """CPD factor triple (A, B, C) with a shared column count (the rank)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=np.float64)
        self.B = np.asarray(self.B, dtype=np.float64)
        self.C = np.asarray(self.C, dtype=np.float64)
        ranks = {m.shape[1] for m in (self.A, self.B, self.C)}
        if len(ranks) != 1:
            raise ValueError(f"factor column counts differ: "
                             f"{[m.shape[1] for m in (self.A, self.B, self.C)]}")
        for name, m in (("A", self.A), ("B", self.B), ("C", self.C)):
            if not np.all(np.isfinite(m)):
                raise ValueError(f"factor {name} has non-finite entries")

    @property
    def rank(self) -> int:
        return self.A.shape[1]

    @property
    def dims(self) -> tuple:
        return (self.A.shape[0], self.B.shape[0], self.C.shape[0])

    def copy(self) -> "Factors":
        return Factors(self.A.copy(), self.B.copy(), self.C.copy())


def _check_mode(mode):
    if mode not in (1, 2, 3):
        raise ValueError(f"mode must be 1, 2 or 3, got {mode}")


def unfold(t: np.ndarray, mode: int) -> np.ndarray:
    """Matricize ``t`` along ``mode``.

    Shapes: mode 1 -> (J*K, I), mode 2 -> (I*K, J), mode 3 -> (I*J, K).
    Row order is first-index-fastest over the two free modes, e.g. the
    mode-3 row index is ``i + I*j``.
    """
    _check_mode(mode)
    t = np.asarray(t)
    i, j, k = t.shape
    if mode == 1:
        return np.moveaxis(t, 0, 2).reshape(j * k, i, order="F")
    if mode == 2:
        return np.moveaxis(t, 1, 2).reshape(i * k, j, order="F")
    return t.reshape(i * j, k, order="F")


def fold(m: np.ndarray, mode: int, dims) -> np.ndarray:
    """Inverse of :func:`unfold`: rebuild the (I, J, K) tensor from a matricization."""
    _check_mode(mode)
    m = np.asarray(m, dtype=np.float64)
    i, j, k = dims
    expected = {1: (j * k, i), 2: (i * k, j), 3: (i * j, k)}[mode]
    if m.shape != expected:
        raise ValueError(f"mode-{mode} matrix shape {m.shape} does not match "
                         f"dims {tuple(dims)} (expected {expected})")
    if mode == 1:
        return np.moveaxis(m.reshape(j, k, i, order="F"), 2, 0)
    if mode == 2:
        return np.moveaxis(m.reshape(i, k, j, order="F"), 2, 1)
    return m.reshape(i, j, k, order="F")


def mode_product(t: np.ndarray, m: np.ndarray, mode: int) -> np.ndarray:
    """Multiply every mode-``mode`` fiber of ``t`` by the matrix ``m``.

    The output replaces that mode's size with ``m.shape[0]``.  Aggregation
    by a fat row-structured matrix is exactly this operation.
    """
    _check_mode(mode)
    t = np.asarray(t, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] != t.shape[mode - 1]:
        raise ValueError(f"matrix shape {m.shape} is incompatible with mode {mode} "
                         f"of tensor dims {t.shape}")
    out = np.tensordot(m, t, axes=(1, mode - 1))
    # tensordot puts the new axis first; restore mode order
    return np.moveaxis(out, 0, mode - 1)


def reconstruct(f: Factors, dims=None) -> np.ndarray:
    """Dense tensor with entries sum_r A[i,r] B[j,r] C[k,r]."""
    if dims is not None and tuple(dims) != f.dims:
        raise ValueError(f"factor row counts {f.dims} do not match requested dims {tuple(dims)}")
    return np.einsum("ir,jr,kr->ijk", f.A, f.B, f.C, optimize=True)


def masked_residual(t: np.ndarray, f: Factors, mask: np.ndarray):
    """Masked fit residual and its squared Frobenius norm.

    Returns ``(resid, cost)`` with ``resid = mask * (t - reconstruct(f))``
    and ``cost = ||resid||_F^2``.
    """
    t = np.asarray(t, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.float64)
    if t.shape != mask.shape:
        raise ValueError(f"mask dims {mask.shape} do not match tensor dims {t.shape}")
    if t.shape != f.dims:
        raise ValueError(f"factor row counts {f.dims} do not match tensor dims {t.shape}")
    resid = mask * (t - reconstruct(f))
    return resid, float(np.vdot(resid, resid))


def frob2(x: np.ndarray) -> float:
    """Squared Frobenius norm."""
    return float(np.vdot(x, x))
