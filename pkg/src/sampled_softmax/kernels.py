"""Dense numeric primitives shared by the sampled and full softmax losses.

Matrices are plain 2-D C-contiguous numpy arrays of ``float32`` or ``float64``;
vectors are 1-D arrays. Every function here is pure.
"""

from __future__ import annotations

import numpy as np

DTYPES = {"f32": np.float32, "f64": np.float64}


class ShapeError(ValueError):
    """Raised when operand shapes violate an operation's contract."""


class ClassIndexError(IndexError):
    """A class id fell outside ``[0, n)``."""

    def __init__(self, bad_id: int, n: int):
        super().__init__(f"class id {bad_id} out of range for {n} rows")
        self.bad_id = bad_id
        self.n = n


def as_dtype(dtype) -> np.dtype:
    """Resolve ``"f32"``/``"f64"`` or a numpy float type to a dtype."""
    if isinstance(dtype, str):
        try:
            dtype = DTYPES[dtype]
        except KeyError:
            raise ValueError(f"unknown dtype {dtype!r}, expected f32 or f64") from None
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"unsupported element type {dtype}")
    return dtype


def matrix(data, dtype="f64") -> np.ndarray:
    """Build a row-major 2-D matrix with the requested element type."""
    m = np.ascontiguousarray(data, dtype=as_dtype(dtype))
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def check_ids(ids, n: int) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64).reshape(-1)
    if ids.size:
        bad = (ids < 0) | (ids >= n)
        if bad.any():
            raise ClassIndexError(int(ids[np.argmax(bad)]), n)
    return ids


def matmul(a: np.ndarray, b: np.ndarray, transpose_b: bool = False) -> np.ndarray:
    """``a @ b`` or ``a @ b.T``."""
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    inner = b.shape[1] if transpose_b else b.shape[0]
    if a.shape[1] != inner:
        raise ShapeError(
            f"matmul inner dimension mismatch: {a.shape} x {b.shape}"
            f"{' (transposed)' if transpose_b else ''}"
        )
    return a @ (b.T if transpose_b else b)


def row_gather(table: np.ndarray, ids) -> np.ndarray:
    """Copy rows ``table[ids]``; repeated ids give repeated rows."""
    ids = check_ids(ids, table.shape[0])
    return table[ids]


def row_logsumexp(m: np.ndarray) -> np.ndarray:
    """Max-shifted ``log(sum(exp(m), axis=1))``."""
    if m.ndim != 2 or m.shape[1] < 1:
        raise ShapeError(f"row_logsumexp needs a B x k matrix with k >= 1, got {m.shape}")
    mx = m.max(axis=1)
    # all -inf rows would give nan from inf - inf
    shift = np.where(np.isfinite(mx), mx, 0)
    return np.log(np.exp(m - shift[:, None]).sum(axis=1)) + shift


def row_dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-row inner products ``sum(a * b, axis=1)``."""
    if a.shape != b.shape or a.ndim != 2:
        raise ShapeError(f"row_dot needs equal 2-D shapes, got {a.shape} and {b.shape}")
    return np.einsum("ij,ij->i", a, b)
