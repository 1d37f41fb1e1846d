"""Timing harness: full softmax vs fused sampled loss vs unfused sampled backward."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .full_softmax import full_backward, full_forward
from .kernels import as_dtype
from .params import INPUT, TARGET, init_table
from .sampled_loss import BatchIndices, backward, forward, naive_backward
from .sampler import LOG_UNIFORM, CandidateDist, draw_candidates, sample_ids

log = logging.getLogger(__name__)

KERNELS = ("full", "sampled", "sampled_naive_bwd")
PASSES = ("forward", "forward_backward")
RECORD_KEYS = ("kernel", "pass", "n_classes", "n_sampled", "n_embed", "n_batch", "dtype",
               "iters", "mean_ns", "p50_ns", "p95_ns", "min_ns")


class ResourceError(RuntimeError):
    pass


@dataclass
class BenchConfig:
    # Table 1 geometry
    n_classes: int = 100_000
    n_sampled: int = 100
    n_embed: int = 300
    n_batch: int = 256
    iters: int = 20
    warmup: int = 2
    seed: int = 0
    dtype: str = "f32"
    kernels: tuple[str, ...] = ("full", "sampled", "sampled_naive_bwd")
    passes: tuple[str, ...] = PASSES

    def validate(self):
        for name in ("n_classes", "n_sampled", "n_embed", "n_batch", "iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.warmup < 0:
            raise ValueError(f"warmup must be >= 0, got {self.warmup}")
        as_dtype(self.dtype)
        unknown = set(self.kernels) - set(KERNELS)
        if unknown or not self.kernels:
            raise ValueError(f"kernels must be a non-empty subset of {KERNELS}, got {self.kernels}")
        if set(self.passes) - set(PASSES) or not self.passes:
            raise ValueError(f"passes must be a non-empty subset of {PASSES}")


@dataclass
class BenchRecord:
    kernel: str
    pass_: str
    n_classes: int
    n_sampled: int
    n_embed: int
    n_batch: int
    dtype: str
    iters: int
    mean_ns: int
    p50_ns: int
    p95_ns: int
    min_ns: int
    # loss from the last timed run; kept for determinism checks, not serialized
    loss: float = field(default=float("nan"), compare=False)

    def to_dict(self) -> dict:
        return {k: getattr(self, "pass_" if k == "pass" else k) for k in RECORD_KEYS}


def _kernel_fns(kernel: str, inp, tgt, batch, cand):
    if kernel == "full":
        def fwd():
            return full_forward(inp, tgt, batch)[0]

        def fwd_bwd():
            loss, cache = full_forward(inp, tgt, batch)
            full_backward(cache)
            return loss
    else:
        def fwd():
            return forward(inp, tgt, batch, cand)[0]

        if kernel == "sampled":
            def fwd_bwd():
                loss, cache = forward(inp, tgt, batch, cand)
                backward(cache)
                return loss
        else:
            def fwd_bwd():
                loss, _ = forward(inp, tgt, batch, cand)
                naive_backward(inp, tgt, batch, cand)
                return loss
    return {"forward": fwd, "forward_backward": fwd_bwd}


def make_problem(cfg: BenchConfig):
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    seeds = rng.integers(0, 2**63, size=2)
    try:
        inp = init_table(cfg.n_classes, cfg.n_embed, int(seeds[0]), role=INPUT, dtype=cfg.dtype)
        tgt = init_table(cfg.n_classes, cfg.n_embed, int(seeds[1]), role=TARGET, dtype=cfg.dtype)
    except MemoryError as e:
        raise ResourceError(
            f"could not allocate two {cfg.n_classes}x{cfg.n_embed} {cfg.dtype} tables; "
            "try fewer --classes, a smaller --embed or --dtype f32"
        ) from e
    dist = CandidateDist(LOG_UNIFORM, cfg.n_classes)
    batch = BatchIndices(rng.integers(0, cfg.n_classes, cfg.n_batch),
                         sample_ids(dist, cfg.n_batch, rng))
    cand = draw_candidates(dist, cfg.n_sampled, batch.labels, rng)
    return inp, tgt, batch, cand


def time_fn(fn, iters: int, warmup: int) -> tuple[np.ndarray, float]:
    for _ in range(warmup):
        fn()
    times = np.empty(iters, dtype=np.int64)
    loss = float("nan")
    for k in range(iters):
        t0 = time.perf_counter_ns()
        loss = fn()
        times[k] = time.perf_counter_ns() - t0
    return np.maximum(times, 1), loss


def run_bench(cfg: BenchConfig) -> list[BenchRecord]:
    cfg.validate()
    inp, tgt, batch, cand = make_problem(cfg)
    records = []
    for kernel in cfg.kernels:
        fns = _kernel_fns(kernel, inp, tgt, batch, cand)
        for pass_ in cfg.passes:
            try:
                times, loss = time_fn(fns[pass_], cfg.iters, cfg.warmup)
            except MemoryError as e:
                raise ResourceError(
                    f"out of memory running {kernel}/{pass_}; try a smaller config"
                ) from e
            rec = BenchRecord(
                kernel, pass_, cfg.n_classes, cfg.n_sampled, cfg.n_embed, cfg.n_batch,
                cfg.dtype, cfg.iters,
                mean_ns=int(round(times.mean())),
                p50_ns=int(np.percentile(times, 50, method="lower")),
                p95_ns=int(np.percentile(times, 95, method="higher")),
                min_ns=int(times.min()),
                loss=loss,
            )
            log.info("%s/%s mean %.3f ms loss %.6f", kernel, pass_, rec.mean_ns / 1e6, loss)
            records.append(rec)
    return records


def emit_jsonl(records, path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for r in records:
                f.write(json.dumps(r.to_dict()) + "\n")
    except OSError as e:
        raise OSError(f"cannot write {path}: {e}") from e


def emit_plot_svg(records, path) -> None:
    """Horizontal bar chart of mean time per (pass, kernel)."""
    if not records:
        raise ValueError("nothing to plot")
    rows = sorted(records, key=lambda r: (r.pass_, r.kernel))
    bar_h, gap, left, width, top = 22, 8, 260, 420, 40
    height = top + len(rows) * (bar_h + gap) + 20
    peak = max(r.mean_ns for r in rows)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{left + width + 120}" '
        f'height="{height}" font-family="sans-serif" font-size="12">',
        f'<text x="10" y="22" font-size="14">mean time per call (ms)</text>',
    ]
    for k, r in enumerate(rows):
        y = top + k * (bar_h + gap)
        w = max(1.0, width * r.mean_ns / peak)
        color = "#4c72b0" if r.pass_ == "forward" else "#dd8452"
        label = escape(f"{r.kernel} / {r.pass_}")
        out.append(f'<text x="10" y="{y + 15}">{label}</text>')
        out.append(f'<rect x="{left}" y="{y}" width="{w:.2f}" height="{bar_h}" fill="{color}"/>')
        out.append(f'<text x="{left + w + 6:.2f}" y="{y + 15}">{r.mean_ns / 1e6:.3f}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")
