"""Candidate distributions and the shared candidate set fed to the sampled loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import ShapeError, check_ids

LOG_UNIFORM = "log-uniform"
UNIFORM = "uniform"


@dataclass(frozen=True)
class CandidateDist:
    """Sampling distribution ``q`` over class ids ``0..n_classes-1``.

    ``log-uniform`` assumes ids are sorted by descending frequency:
    ``q(k) = (ln(k + 2) - ln(k + 1)) / ln(n + 1)``.
    """

    kind: str = LOG_UNIFORM
    n_classes: int = 1

    def __post_init__(self):
        if self.kind not in (LOG_UNIFORM, UNIFORM):
            raise ValueError(f"unknown distribution {self.kind!r}")
        if self.n_classes < 1:
            raise ValueError(f"n_classes must be >= 1, got {self.n_classes}")


@dataclass
class CandidateSet:
    sample_ids: np.ndarray
    sample_log_priors: np.ndarray
    label_log_priors: np.ndarray

    @property
    def m(self) -> int:
        return self.sample_ids.size


def prob(dist: CandidateDist, class_id):
    """``q(class_id)``; accepts a scalar id or an array of ids."""
    scalar = np.ndim(class_id) == 0
    ids = check_ids(class_id, dist.n_classes)
    if dist.kind == UNIFORM:
        p = np.full(ids.shape, 1.0 / dist.n_classes)
    else:
        p = np.log1p(1.0 / (ids + 1.0)) / np.log1p(float(dist.n_classes))
    return float(p[0]) if scalar else p


def log_prob(dist: CandidateDist, class_ids) -> np.ndarray:
    return np.log(prob(dist, np.asarray(class_ids).reshape(-1)))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def sample_ids(dist: CandidateDist, size: int, seed) -> np.ndarray:
    """``size`` i.i.d. draws from ``dist``, with replacement."""
    rng = _rng(seed)
    n = dist.n_classes
    if dist.kind == UNIFORM:
        return rng.integers(0, n, size=size, dtype=np.int64)
    # inverse CDF: P(id <= k) = ln(k + 2) / ln(n + 1)
    u = rng.random(size)
    ids = np.floor(np.expm1(u * np.log1p(float(n)))).astype(np.int64)
    return np.clip(ids, 0, n - 1)


def draw_candidates(dist: CandidateDist, m: int, labels, rng_seed) -> CandidateSet:
    """Draw ``m`` shared candidates and look up priors for samples and labels.

    Labels are not excluded from the draw, so a sample can coincide with a
    batch label (an accidental hit) and the class then appears twice among
    that row's candidates.
    """
    if m < 1:
        raise ValueError(f"need at least one sampled candidate, got m={m}")
    labels = check_ids(labels, dist.n_classes)
    ids = sample_ids(dist, m, rng_seed)
    return CandidateSet(ids, log_prob(dist, ids), log_prob(dist, labels))


def exhaustive_candidates(n: int, exclude_label: int) -> CandidateSet:
    """Every class except ``exclude_label``, with uniform priors ``1/n``.

    With a single-example batch labelled ``exclude_label`` the sampled loss
    then covers all ``n`` classes exactly once.
    """
    if n < 2:
        raise ShapeError(f"exhaustive candidates need n >= 2, got n={n}")
    check_ids([exclude_label], n)
    ids = np.delete(np.arange(n, dtype=np.int64), exclude_label)
    lp = np.log(1.0 / n)
    return CandidateSet(ids, np.full(n - 1, lp), np.full(1, lp))
