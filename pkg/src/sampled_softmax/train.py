"""Toy SkipGram trainer on a synthetic Zipf corpus, driven by the sampled loss."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .params import INPUT, TARGET, apply_sgd, init_table
from .sampled_loss import BatchIndices, loss_and_grads
from .sampler import LOG_UNIFORM, CandidateDist, draw_candidates

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    n_classes: int = 2000
    n_embed: int = 32
    n_batch: int = 128
    n_sampled: int = 32
    steps: int = 1000
    lr: float = 0.05
    seed: int = 7
    window: int = 2
    log_every: int = 50
    # 0.5 / n_embed leaves the bilinear model stuck near zero at this lr
    init_scale: float = 0.5

    def validate(self):
        for name in ("n_classes", "n_embed", "n_batch", "n_sampled", "steps", "window", "log_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.init_scale > 0:
            raise ValueError(f"init_scale must be positive, got {self.init_scale}")
        if not self.lr >= 0 or not np.isfinite(self.lr):
            raise ValueError(f"lr must be finite and non-negative, got {self.lr}")


@dataclass
class TrainResult:
    log: list[tuple[int, float]]
    losses: np.ndarray = field(repr=False)
    input_table: object = field(repr=False, default=None)
    target_table: object = field(repr=False, default=None)


class ZipfCorpus:
    """(center, context) pairs: center ~ Zipf(s=1) over ids, context = center + offset mod n.

    Offsets are uniform over ``{-window..window} \\ {0}``.
    """

    def __init__(self, n_classes: int, window: int = 2):
        ranks = np.arange(1, n_classes + 1, dtype=np.float64)
        self.cdf = np.cumsum(1.0 / ranks)
        self.cdf /= self.cdf[-1]
        self.n_classes = n_classes
        self.offsets = np.array([o for o in range(-window, window + 1) if o != 0])

    def batch(self, size: int, rng: np.random.Generator) -> BatchIndices:
        centers = np.searchsorted(self.cdf, rng.random(size), side="right")
        centers = np.minimum(centers, self.n_classes - 1)
        contexts = (centers + rng.choice(self.offsets, size)) % self.n_classes
        return BatchIndices(centers, contexts)


def train_skipgram(cfg: TrainConfig) -> TrainResult:
    cfg.validate()
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    seeds = rng.integers(0, 2**63, size=2)
    inp = init_table(cfg.n_classes, cfg.n_embed, int(seeds[0]), cfg.init_scale, INPUT)
    tgt = init_table(cfg.n_classes, cfg.n_embed, int(seeds[1]), cfg.init_scale, TARGET)
    corpus = ZipfCorpus(cfg.n_classes, cfg.window)
    dist = CandidateDist(LOG_UNIFORM, cfg.n_classes)

    losses = np.empty(cfg.steps)
    history = []
    for step in range(cfg.steps):
        batch = corpus.batch(cfg.n_batch, rng)
        cand = draw_candidates(dist, cfg.n_sampled, batch.labels, rng)
        loss, grads = loss_and_grads(inp, tgt, batch, cand)
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite loss {loss} at step {step}")
        apply_sgd(inp, grads.grad_input_embed, cfg.lr)
        apply_sgd(tgt, grads.grad_target_embed, cfg.lr)
        losses[step] = loss
        if step % cfg.log_every == 0:
            history.append((step, loss))
            log.info("step %d loss %.6f", step, loss)
    if not (np.isfinite(inp.matrix).all() and np.isfinite(tgt.matrix).all()):
        raise TrainingError("non-finite embedding values after training")
    return TrainResult(history, losses, inp, tgt)
