"""Exact softmax cross-entropy over every class; the reference for the sampled loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels as K
from .params import EmbedTable, SparseGrad


@dataclass
class FullForwardCache:
    logits: np.ndarray  # (B, n)
    Z_full: np.ndarray  # (B,)
    inputs_embed: np.ndarray
    target_matrix: np.ndarray
    batch_inputs: np.ndarray
    batch_labels: np.ndarray
    input_shape: tuple[int, int]

    def probs(self) -> np.ndarray:
        return np.exp(self.logits - self.Z_full[:, None])


def full_forward(input_table: EmbedTable, target_table: EmbedTable, batch) -> tuple[float, FullForwardCache]:
    if input_table.n_embed != target_table.n_embed:
        raise K.ShapeError(
            f"embedding widths differ: input {input_table.shape}, target {target_table.shape}"
        )
    labels = K.check_ids(batch.labels, target_table.n_classes)
    inputs_embed = K.row_gather(input_table.matrix, batch.inputs)
    logits = K.matmul(inputs_embed, target_table.matrix, transpose_b=True)
    Z = K.row_logsumexp(logits)
    label_logits = logits[np.arange(labels.size), labels]
    loss = float(np.mean(Z - label_logits))
    cache = FullForwardCache(logits, Z, inputs_embed, target_table.matrix,
                             batch.inputs, labels, input_table.shape)
    return loss, cache


def full_backward(cache: FullForwardCache) -> tuple[SparseGrad, np.ndarray]:
    """Gradient rows for the batch inputs, and the dense target-table gradient."""
    B = cache.batch_inputs.size
    d_logits = cache.probs()
    d_logits[np.arange(B), cache.batch_labels] -= 1
    d_logits /= B
    grad_input = K.matmul(d_logits, cache.target_matrix)
    grad_target = K.matmul(d_logits.T, cache.inputs_embed)
    return SparseGrad(cache.batch_inputs, grad_input, cache.input_shape), grad_target
