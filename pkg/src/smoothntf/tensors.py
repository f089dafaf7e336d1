"""Dense N-way tensor kernels.

Tensors are plain ``numpy.ndarray`` objects with ``float64`` entries stored
row-major (C order, last index fastest).  Mode-n unfoldings and Khatri-Rao
products follow the standard convention in which the lowest remaining mode
varies fastest along unfolding columns, so that for any factor list ``A``

    mode_unfold(reconstruct(A), n) == A[n] @ khatri_rao(A, skip=n).T

Modes are 0-based, matching numpy axis numbering.
"""

from __future__ import annotations

import string
from typing import Sequence

import numpy as np

__all__ = [
    "as_tensor",
    "as_weight_mask",
    "outer_rank_one",
    "hadamard",
    "frobenius_inner",
    "frobenius_norm",
    "mode_unfold",
    "mode_fold",
    "khatri_rao",
    "contract_all_but",
]


def as_tensor(values, shape: Sequence[int] | None = None) -> np.ndarray:
    """Coerce ``values`` to a C-contiguous float64 array and validate it.

    All entries must be finite and every dimension must be at least 1.
    """
    x = np.ascontiguousarray(values, dtype=np.float64)
    if shape is not None:
        x = x.reshape(tuple(shape))
    if x.ndim < 1:
        x = x.reshape(1)
    if any(d < 1 for d in x.shape):
        raise ValueError(f"tensor dimensions must be >= 1, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("tensor entries must be finite (no NaN or Inf)")
    return x


def as_weight_mask(values, shape: Sequence[int] | None = None) -> np.ndarray:
    """Like :func:`as_tensor` but additionally requires all entries >= 0."""
    w = as_tensor(values, shape)
    if np.any(w < 0):
        raise ValueError("weight mask entries must be non-negative")
    return w


def outer_rank_one(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Outer product of N vectors: entry (i_1, ..., i_N) = prod_n v[n][i_n]."""
    if len(vectors) == 0:
        raise ValueError("outer product requires at least one vector")
    out = np.asarray(vectors[0], dtype=np.float64)
    if out.ndim != 1:
        raise ValueError("outer product factors must be 1-D")
    for v in vectors[1:]:
        v = np.asarray(v, dtype=np.float64)
        if v.ndim != 1:
            raise ValueError("outer product factors must be 1-D")
        out = np.multiply.outer(out, v)
    return out


def _check_same_shape(x: np.ndarray, y: np.ndarray, what: str) -> None:
    if x.shape != y.shape:
        raise ValueError(f"{what}: shape mismatch {x.shape} vs {y.shape}")


def hadamard(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Entrywise product of two same-shaped tensors."""
    _check_same_shape(x, y, "hadamard")
    return x * y


def frobenius_inner(x: np.ndarray, y: np.ndarray) -> float:
    """Frobenius scalar product: sum of entrywise products."""
    _check_same_shape(x, y, "frobenius_inner")
    return float(np.dot(x.ravel(), y.ravel()))


def frobenius_norm(x: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(x).ravel()))


def _check_mode(x: np.ndarray, mode: int) -> None:
    if not 0 <= mode < x.ndim:
        raise ValueError(f"mode {mode} out of range for order-{x.ndim} tensor")


def mode_unfold(x: np.ndarray, mode: int) -> np.ndarray:
    """Mode-n unfolding into an I_n x (prod of other dims) matrix.

    Columns are ordered with the lowest remaining mode varying fastest.
    """
    _check_mode(x, mode)
    return np.reshape(np.moveaxis(x, mode, 0), (x.shape[mode], -1), order="F")


def mode_fold(m: np.ndarray, mode: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`mode_unfold` for a tensor of the given shape."""
    shape = tuple(shape)
    if not 0 <= mode < len(shape):
        raise ValueError(f"mode {mode} out of range for shape {shape}")
    rest = tuple(d for i, d in enumerate(shape) if i != mode)
    full = np.reshape(m, (shape[mode],) + rest, order="F")
    return np.ascontiguousarray(np.moveaxis(full, 0, mode))


def khatri_rao(matrices: Sequence[np.ndarray], skip: int | None = None) -> np.ndarray:
    """Column-wise Kronecker product of factor matrices.

    ``skip`` omits one matrix (the mode being solved for).  Row ordering
    matches :func:`mode_unfold`: the first retained matrix's row index varies
    fastest.  All matrices must share the same column count.
    """
    mats = [m for i, m in enumerate(matrices) if i != skip]
    if not mats:
        raise ValueError("khatri_rao requires at least one matrix after skipping")
    cols = mats[0].shape[1]
    for m in mats:
        if m.ndim != 2 or m.shape[1] != cols:
            raise ValueError("khatri_rao: matrices must be 2-D with equal column counts")
    out = mats[0]
    for m in mats[1:]:
        out = (m[:, None, :] * out[None, :, :]).reshape(-1, cols)
    return out


def contract_all_but(x: np.ndarray, vectors: Sequence[np.ndarray], mode: int | None) -> np.ndarray | float:
    """Contract every mode of ``x`` except ``mode`` with the matching vector.

    With ``mode=None`` all modes are contracted and a scalar is returned.
    Used by the solvers to evaluate per-coordinate quadratic coefficients.
    """
    n = x.ndim
    if len(vectors) != n:
        raise ValueError("contract_all_but: need one vector per mode")
    if n > 20:
        raise ValueError("tensors of order > 20 are not supported")
    letters = string.ascii_lowercase[:n]
    operands = [x]
    subs = [letters]
    for i in range(n):
        if i == mode:
            continue
        operands.append(np.asarray(vectors[i], dtype=np.float64))
        subs.append(letters[i])
    target = "" if mode is None else letters[mode]
    expr = ",".join(subs) + "->" + target
    res = np.einsum(expr, *operands, optimize=True)
    return float(res) if mode is None else res
