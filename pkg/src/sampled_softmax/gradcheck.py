"""Central finite-difference checks for the analytic loss gradients.

All arithmetic here is float64. Candidates are drawn once per check and held
fixed while coordinates are perturbed: the sampled loss is differentiated at
a fixed candidate set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .full_softmax import full_backward, full_forward
from .params import INPUT, TARGET, EmbedTable, densify, init_table
from .sampled_loss import BatchIndices, forward, loss_and_grads
from .sampler import CandidateDist, draw_candidates, sample_ids

DEFAULT_H = 1e-6
DEFAULT_RTOL = 1e-5
DEFAULT_ATOL = 1e-8


class GradcheckError(RuntimeError):
    """The loss became non-finite under perturbation."""


@dataclass
class GradReport:
    max_rel_err: float
    max_abs_err: float
    worst_coordinate: tuple[str, int, int] | None
    n_checked: int
    passed: bool

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}: {self.n_checked} coordinates, max_rel_err={self.max_rel_err:.3e}, "
                f"max_abs_err={self.max_abs_err:.3e}, worst={self.worst_coordinate}")


@dataclass
class GradConfig:
    n_classes: int = 20
    n_embed: int = 4
    n_batch: int = 4
    n_sampled: int = 8
    dist: str = "log-uniform"
    scale: float = 1.0

    def validate(self):
        for name in ("n_classes", "n_embed", "n_batch", "n_sampled"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")


def numeric_grad(loss_fn: Callable[[], float], table, row: int, col: int,
                 h: float = DEFAULT_H) -> float:
    """``(f(x + h) - f(x - h)) / 2h`` for entry ``table[row, col]``.

    ``loss_fn`` takes no arguments and reads ``table`` itself. The entry is
    restored exactly before returning.
    """
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    m = table.matrix if isinstance(table, EmbedTable) else table
    x = m[row, col]
    try:
        m[row, col] = x + h
        f_plus = loss_fn()
        m[row, col] = x - h
        f_minus = loss_fn()
    finally:
        m[row, col] = x
    if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
        raise GradcheckError(f"non-finite loss perturbing ({row}, {col}): {f_plus}, {f_minus}")
    return (f_plus - f_minus) / (2 * h)


def compare(analytic: dict[str, np.ndarray], tables: dict[str, EmbedTable],
            loss_fn: Callable[[], float], h: float = DEFAULT_H, rtol: float = DEFAULT_RTOL,
            atol: float = DEFAULT_ATOL) -> GradReport:
    """Sweep every coordinate of every table against ``analytic[tag]``.

    A coordinate's error is ``|a - n| / max(|a|, |n|, atol / rtol)``, so it
    stays below ``rtol`` exactly when the relative error is below ``rtol`` or
    the absolute error is below ``atol``.
    """
    floor = atol / rtol
    max_rel = max_abs = 0.0
    worst = None
    count = 0
    for tag, table in tables.items():
        a_grad = analytic[tag]
        n_rows, n_cols = table.shape
        for r in range(n_rows):
            for c in range(n_cols):
                num = numeric_grad(loss_fn, table, r, c, h)
                a = float(a_grad[r, c])
                err = abs(a - num)
                denom = max(abs(a), abs(num), floor)
                rel = err / denom if denom > 0 else 0.0
                if worst is None or rel > max_rel:
                    max_rel, worst = rel, (tag, r, c)
                max_abs = max(max_abs, err)
                count += 1
    return GradReport(max_rel, max_abs, worst, count, max_rel < rtol)


def random_problem(cfg: GradConfig, seed: int):
    """Float64 tables, a batch and a frozen candidate set for one check."""
    cfg.validate()
    rng = np.random.Generator(np.random.PCG64(seed))
    table_seeds = rng.integers(0, 2**63, size=2)
    inp = init_table(cfg.n_classes, cfg.n_embed, int(table_seeds[0]), cfg.scale, INPUT)
    tgt = init_table(cfg.n_classes, cfg.n_embed, int(table_seeds[1]), cfg.scale, TARGET)
    dist = CandidateDist(cfg.dist, cfg.n_classes)
    batch = BatchIndices(rng.integers(0, cfg.n_classes, cfg.n_batch),
                         sample_ids(dist, cfg.n_batch, rng))
    cand = draw_candidates(dist, cfg.n_sampled, batch.labels, rng)
    return inp, tgt, batch, cand


def check_sampled(cfg: GradConfig, seed: int, rtol: float = DEFAULT_RTOL,
                  atol: float = DEFAULT_ATOL, h: float = DEFAULT_H, problem=None) -> GradReport:
    inp, tgt, batch, cand = problem if problem is not None else random_problem(cfg, seed)
    _, grads = loss_and_grads(inp, tgt, batch, cand)
    analytic = {INPUT: densify(grads.grad_input_embed), TARGET: densify(grads.grad_target_embed)}
    return compare(analytic, {INPUT: inp, TARGET: tgt},
                   lambda: forward(inp, tgt, batch, cand)[0], h, rtol, atol)


def check_full(cfg: GradConfig, seed: int, rtol: float = DEFAULT_RTOL,
               atol: float = DEFAULT_ATOL, h: float = DEFAULT_H) -> GradReport:
    inp, tgt, batch, _ = random_problem(cfg, seed)
    _, cache = full_forward(inp, tgt, batch)
    g_in, g_tgt = full_backward(cache)
    analytic = {INPUT: densify(g_in), TARGET: g_tgt}
    return compare(analytic, {INPUT: inp, TARGET: tgt},
                   lambda: full_forward(inp, tgt, batch)[0], h, rtol, atol)


def random_config(rng: np.random.Generator, max_n=50, max_d=8, max_b=8, max_m=16) -> GradConfig:
    return GradConfig(
        n_classes=int(rng.integers(2, max_n + 1)),
        n_embed=int(rng.integers(1, max_d + 1)),
        n_batch=int(rng.integers(1, max_b + 1)),
        n_sampled=int(rng.integers(1, max_m + 1)),
        dist=str(rng.choice(["log-uniform", "uniform"])),
    )
