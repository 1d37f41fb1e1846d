"""Embedding tables, sparse gradient slices and plain SGD updates."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kernels import ShapeError, as_dtype, check_ids

INPUT = "input"
TARGET = "target"

_MAGIC = b"SSME"
_VERSION = 1
_HEADER = struct.Struct("<4sIQQB")
_DTYPE_CODES = {np.dtype(np.float32): 1, np.dtype(np.float64): 2}
_CODE_DTYPES = {v: k for k, v in _DTYPE_CODES.items()}


@dataclass
class EmbedTable:
    matrix: np.ndarray
    role: str = INPUT

    def __post_init__(self):
        if self.role not in (INPUT, TARGET):
            raise ValueError(f"role must be {INPUT!r} or {TARGET!r}, got {self.role!r}")
        if self.matrix.ndim != 2 or min(self.matrix.shape) < 1:
            raise ShapeError(f"embedding table needs shape (n>=1, d>=1), got {self.matrix.shape}")

    @property
    def n_classes(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_embed(self) -> int:
        return self.matrix.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def copy(self) -> "EmbedTable":
        return EmbedTable(self.matrix.copy(), self.role)


@dataclass
class SparseGrad:
    """Gradient rows for a subset of table rows.

    ``indices`` may repeat; repeated rows add up.
    """

    indices: np.ndarray
    rows: np.ndarray
    dense_shape: tuple[int, int]

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        self.dense_shape = tuple(int(s) for s in self.dense_shape)
        if self.rows.ndim != 2 or self.rows.shape[0] != self.indices.size:
            raise ShapeError(
                f"{self.indices.size} indices but gradient rows have shape {self.rows.shape}"
            )
        if self.indices.size and self.rows.shape[1] != self.dense_shape[1]:
            raise ShapeError(f"row width {self.rows.shape[1]} != dense shape {self.dense_shape}")
        check_ids(self.indices, self.dense_shape[0])


def init_table(n_classes: int, n_embed: int, seed: int, scale: float | None = None,
               role: str = INPUT, dtype="f64") -> EmbedTable:
    """Uniform ``[-scale, scale]`` init from numpy's PCG64 generator.

    ``scale`` defaults to ``0.5 / n_embed``.
    """
    if n_classes < 1 or n_embed < 1:
        raise ValueError(f"table dimensions must be >= 1, got ({n_classes}, {n_embed})")
    if scale is None:
        scale = 0.5 / n_embed
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    rng = np.random.Generator(np.random.PCG64(seed))
    values = rng.uniform(-scale, scale, size=(n_classes, n_embed))
    return EmbedTable(values.astype(as_dtype(dtype)), role)


def densify(g: SparseGrad, dtype=None) -> np.ndarray:
    out = np.zeros(g.dense_shape, dtype=dtype or (g.rows.dtype if g.rows.size else np.float64))
    np.add.at(out, g.indices, g.rows)
    return out


def apply_sgd(table: EmbedTable, g: SparseGrad, lr: float) -> EmbedTable:
    """In-place ``table -= lr * densify(g)`` touching only the indexed rows."""
    if tuple(g.dense_shape) != table.shape:
        raise ShapeError(f"gradient shape {g.dense_shape} does not match table {table.shape}")
    if not np.isfinite(lr):
        raise ValueError(f"learning rate must be finite, got {lr}")
    ids = check_ids(g.indices, table.n_classes)
    if ids.size == 0:
        return table
    uniq, inverse = np.unique(ids, return_inverse=True)
    summed = np.zeros((uniq.size, table.n_embed), dtype=np.result_type(g.rows, table.matrix))
    np.add.at(summed, inverse, g.rows)
    table.matrix[uniq] -= (lr * summed).astype(table.matrix.dtype, copy=False)
    return table


def save_table(table: EmbedTable, path) -> None:
    """Write the ``SSME`` checkpoint: 25-byte little-endian header then row-major values."""
    m = table.matrix
    header = _HEADER.pack(_MAGIC, _VERSION, m.shape[0], m.shape[1], _DTYPE_CODES[m.dtype])
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(m, dtype=m.dtype.newbyteorder("<")).tobytes())


def load_table(path, role: str = INPUT) -> EmbedTable:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, rows, cols, code = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    if code not in _CODE_DTYPES:
        raise ValueError(f"{path}: unknown dtype code {code}")
    dtype = _CODE_DTYPES[code].newbyteorder("<")
    expected = rows * cols * dtype.itemsize
    if len(raw) - _HEADER.size != expected:
        raise ValueError(f"{path}: expected {expected} payload bytes, got {len(raw) - _HEADER.size}")
    values = np.frombuffer(raw, dtype=dtype, offset=_HEADER.size).reshape(rows, cols)
    return EmbedTable(values.astype(_CODE_DTYPES[code]), role)
