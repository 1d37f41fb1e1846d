"""Fused sampled-softmax cross-entropy with a hand-written backward pass.

Each example ``i`` scores its label against ``m`` candidates shared by the
whole batch. Every candidate logit is corrected by subtracting the log of its
sampling probability, and the loss is the batch mean of
``logsumexp(candidates) - label_logit``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels as K
from .params import EmbedTable, SparseGrad
from .sampler import CandidateSet


@dataclass
class BatchIndices:
    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.int64).reshape(-1)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.inputs.size != self.labels.size:
            raise K.ShapeError(f"{self.inputs.size} inputs but {self.labels.size} labels")
        if self.inputs.size == 0:
            raise K.ShapeError("empty batch")

    def __len__(self):
        return self.inputs.size


@dataclass
class ForwardCache:
    labels_logits: np.ndarray  # (B,)
    samples_logits: np.ndarray  # (B, m)
    Z: np.ndarray  # (B,)
    inputs_embed: np.ndarray  # (B, d)
    samples_embed: np.ndarray  # (m, d)
    labels_embed: np.ndarray  # (B, d)
    batch_inputs: np.ndarray
    batch_labels: np.ndarray
    sample_ids: np.ndarray
    input_shape: tuple[int, int]
    target_shape: tuple[int, int]


@dataclass
class LossGrads:
    grad_input_embed: SparseGrad
    grad_target_embed: SparseGrad


def _check_tables(input_table: EmbedTable, target_table: EmbedTable):
    if input_table.n_embed != target_table.n_embed:
        raise K.ShapeError(
            f"embedding widths differ: input {input_table.shape}, target {target_table.shape}"
        )


def _check_cand(cand: CandidateSet, batch: BatchIndices):
    if cand.m < 1:
        raise K.ShapeError("candidate set has no samples")
    if cand.sample_log_priors.shape != (cand.m,):
        raise K.ShapeError(
            f"{cand.m} samples but log-priors of shape {cand.sample_log_priors.shape}"
        )
    if cand.label_log_priors.shape != (len(batch),):
        raise K.ShapeError(
            f"batch of {len(batch)} but label log-priors of shape {cand.label_log_priors.shape}"
        )


def forward(input_table: EmbedTable, target_table: EmbedTable, batch: BatchIndices,
            cand: CandidateSet) -> tuple[float, ForwardCache]:
    _check_tables(input_table, target_table)
    _check_cand(cand, batch)
    dtype = target_table.matrix.dtype

    inputs_embed = K.row_gather(input_table.matrix, batch.inputs)
    samples_embed = K.row_gather(target_table.matrix, cand.sample_ids)
    labels_embed = K.row_gather(target_table.matrix, batch.labels)

    labels_logits = K.row_dot(labels_embed, inputs_embed) - cand.label_log_priors.astype(dtype)
    samples_logits = K.matmul(inputs_embed, samples_embed, transpose_b=True)
    samples_logits -= cand.sample_log_priors.astype(dtype)

    candidate_logits = np.concatenate([samples_logits, labels_logits[:, None]], axis=1)
    Z = K.row_logsumexp(candidate_logits)
    loss = float(np.mean(Z - labels_logits))

    cache = ForwardCache(
        labels_logits, samples_logits, Z, inputs_embed, samples_embed, labels_embed,
        batch.inputs, batch.labels, np.asarray(cand.sample_ids, dtype=np.int64),
        input_table.shape, target_table.shape,
    )
    return loss, cache


def backward(cache: ForwardCache) -> LossGrads:
    """Analytic gradients w.r.t. both tables as sparse row slices.

    Rows of ``grad_target_embed`` are ordered samples first, then labels.
    """
    B = cache.batch_inputs.size
    samples_pred = np.exp(cache.samples_logits - cache.Z[:, None]) / B
    samples_mass = samples_pred.sum(axis=1, keepdims=True)

    grad_input = K.matmul(samples_pred, cache.samples_embed)
    grad_input -= samples_mass * cache.labels_embed

    grad_target_samples = K.matmul(samples_pred.T, cache.inputs_embed)
    grad_target_labels = -samples_mass * cache.inputs_embed
    grad_target = np.concatenate([grad_target_samples, grad_target_labels], axis=0)

    return LossGrads(
        SparseGrad(cache.batch_inputs, grad_input, cache.input_shape),
        SparseGrad(np.concatenate([cache.sample_ids, cache.batch_labels]), grad_target,
                   cache.target_shape),
    )


def loss_and_grads(input_table: EmbedTable, target_table: EmbedTable, batch: BatchIndices,
                   cand: CandidateSet) -> tuple[float, LossGrads]:
    loss, cache = forward(input_table, target_table, batch, cand)
    return loss, backward(cache)


def naive_backward(input_table: EmbedTable, target_table: EmbedTable, batch: BatchIndices,
                   cand: CandidateSet) -> LossGrads:
    """Unfused baseline: rebuilds every intermediate from the tables.

    Follows the chain rule node by node (gather, logits, concat, softmax,
    one-hot subtraction, split) instead of reusing a forward cache. Same
    result as ``backward``; only the benchmark should call it.
    """
    _check_tables(input_table, target_table)
    _check_cand(cand, batch)
    dtype = target_table.matrix.dtype
    B, m = len(batch), cand.m

    inputs_embed = K.row_gather(input_table.matrix, batch.inputs)
    samples_embed = K.row_gather(target_table.matrix, cand.sample_ids)
    labels_embed = K.row_gather(target_table.matrix, batch.labels)
    labels_logits = K.row_dot(labels_embed, inputs_embed) - cand.label_log_priors.astype(dtype)
    samples_logits = K.matmul(inputs_embed, samples_embed, transpose_b=True)
    samples_logits = samples_logits - cand.sample_log_priors.astype(dtype)
    candidate_logits = np.concatenate([samples_logits, labels_logits[:, None]], axis=1)
    Z = K.row_logsumexp(candidate_logits)

    d_logits = np.exp(candidate_logits - Z[:, None])
    one_hot = np.zeros_like(d_logits)
    one_hot[:, m] = 1
    d_logits = (d_logits - one_hot) / B
    d_samples, d_labels = d_logits[:, :m], d_logits[:, m:]

    grad_input = K.matmul(d_samples, samples_embed) + d_labels * labels_embed
    grad_target = np.concatenate(
        [K.matmul(d_samples.T, inputs_embed), d_labels * inputs_embed], axis=0
    )
    return LossGrads(
        SparseGrad(batch.inputs, grad_input, input_table.shape),
        SparseGrad(np.concatenate([cand.sample_ids, batch.labels]), grad_target,
                   target_table.shape),
    )
