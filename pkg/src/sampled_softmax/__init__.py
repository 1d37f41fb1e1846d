"""Sampled softmax cross-entropy with an explicit sparse backward pass."""

from .full_softmax import FullForwardCache, full_backward, full_forward
from .kernels import ClassIndexError, ShapeError, matmul, matrix, row_dot, row_gather, row_logsumexp
from .params import EmbedTable, SparseGrad, apply_sgd, densify, init_table, load_table, save_table
from .sampled_loss import BatchIndices, ForwardCache, LossGrads, backward, forward, loss_and_grads
from .sampler import CandidateDist, CandidateSet, draw_candidates, exhaustive_candidates, prob

__all__ = [
    "BatchIndices", "CandidateDist", "CandidateSet", "ClassIndexError", "EmbedTable",
    "ForwardCache", "FullForwardCache", "LossGrads", "ShapeError", "SparseGrad", "apply_sgd",
    "backward", "densify", "draw_candidates", "exhaustive_candidates", "forward",
    "full_backward", "full_forward", "init_table", "load_table", "loss_and_grads", "matmul",
    "matrix", "prob", "row_dot", "row_gather", "row_logsumexp", "save_table",
]
