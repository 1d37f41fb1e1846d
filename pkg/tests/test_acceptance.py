"""Exit criteria. Each test prints one ``[PASS]``/``[FAIL]`` line; run with ``-s`` to see them."""

import math
import time

import numpy as np
import pytest
from scipy import stats

from sampled_softmax.bench import BenchConfig, run_bench
from sampled_softmax.full_softmax import full_backward, full_forward
from sampled_softmax.gradcheck import check_full, check_sampled, numeric_grad, random_config, random_problem
from sampled_softmax.params import INPUT, TARGET, EmbedTable, densify
from sampled_softmax.sampled_loss import BatchIndices, forward, loss_and_grads
from sampled_softmax.sampler import (
    LOG_UNIFORM, UNIFORM, CandidateDist, CandidateSet, exhaustive_candidates, prob, sample_ids,
)
from sampled_softmax.train import TrainConfig, train_skipgram


def verdict(name, ok, detail):
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, detail


def test_gradient_oracle_suite():
    rng = np.random.default_rng(20240)
    t0 = time.perf_counter()
    worst = (0.0, None)
    failures = []
    for k in range(50):
        cfg = random_config(rng)
        seed = int(rng.integers(2**31))
        for kind, check in (("sampled", check_sampled), ("full", check_full)):
            report = check(cfg, seed, rtol=1e-5, atol=1e-8, h=1e-6)
            if report.max_rel_err > worst[0]:
                worst = (report.max_rel_err, (kind, k, report.worst_coordinate))
            if not report.passed:
                failures.append((kind, k, cfg, report.summary()))
    elapsed = time.perf_counter() - t0
    verdict("gradient oracle suite", not failures and elapsed < 120,
            f"50 configs x 2 losses, worst floored rel err {worst[0]:.2e} at {worst[1]}, "
            f"{elapsed:.1f}s, failures={failures[:3]}")


def test_oracle_equivalence():
    rng = np.random.default_rng(77)
    max_loss = max_grad = 0.0
    for _ in range(20):
        n, d = int(rng.integers(2, 41)), int(rng.integers(1, 9))
        inp = EmbedTable(rng.normal(size=(n, d)), INPUT)
        tgt = EmbedTable(rng.normal(size=(n, d)), TARGET)
        y = int(rng.integers(n))
        batch = BatchIndices([int(rng.integers(n))], [y])
        loss, grads = loss_and_grads(inp, tgt, batch, exhaustive_candidates(n, y))
        full_loss, cache = full_forward(inp, tgt, batch)
        g_in, g_tgt = full_backward(cache)
        max_loss = max(max_loss, abs(loss - full_loss))
        max_grad = max(max_grad,
                       np.abs(densify(grads.grad_input_embed) - densify(g_in)).max(),
                       np.abs(densify(grads.grad_target_embed) - g_tgt).max())
    verdict("oracle equivalence", max_loss <= 1e-10 and max_grad <= 1e-9,
            f"20 instances, max |loss diff| {max_loss:.2e} (<=1e-10), max |grad diff| {max_grad:.2e} (<=1e-9)")


def test_worked_micro_example(micro):
    inp, tgt, batch, cand = micro
    loss, grads = loss_and_grads(*micro)
    p1 = 1 / (1 + math.e)
    rows = [grads.grad_input_embed.rows[0, 0], *grads.grad_target_embed.rows[:, 0]]
    fd = [
        numeric_grad(lambda: forward(*micro)[0], inp, 0, 0),
        numeric_grad(lambda: forward(*micro)[0], tgt, 1, 0),
        numeric_grad(lambda: forward(*micro)[0], tgt, 0, 0),
    ]
    ok = (abs(loss - math.log(1 + math.exp(-1))) <= 1e-9
          and all(abs(abs(r) - p1) <= 1e-9 for r in rows)
          and np.allclose(rows, [-p1, p1, -p1], rtol=0, atol=1e-9)
          and np.allclose(fd, rows, rtol=0, atol=1e-9))
    verdict("worked micro-example", ok,
            f"loss {loss:.12f} vs ln(1+1/e) {math.log(1 + math.exp(-1)):.12f}; grad rows {np.round(rows, 12)}, "
            f"finite differences {np.round(fd, 12)}, 1/(1+e)={p1:.12f}")


def _instance(rng):
    cfg = random_config(rng)
    return random_problem(cfg, int(rng.integers(2**31)))


def test_invariance_suite():
    rng = np.random.default_rng(4242)
    shift_err = perm_err = norm_err = 0.0
    min_loss = math.inf
    for _ in range(120):
        inp, tgt, batch, cand = _instance(rng)
        loss, grads = loss_and_grads(inp, tgt, batch, cand)

        c = float(rng.uniform(-30, 30))
        shifted = CandidateSet(cand.sample_ids, cand.sample_log_priors + c, cand.label_log_priors + c)
        l2, g2 = loss_and_grads(inp, tgt, batch, shifted)
        shift_err = max(shift_err, abs(l2 - loss),
                        np.abs(g2.grad_input_embed.rows - grads.grad_input_embed.rows).max(),
                        np.abs(g2.grad_target_embed.rows - grads.grad_target_embed.rows).max())

        perm = rng.permutation(cand.m)
        permuted = CandidateSet(cand.sample_ids[perm], cand.sample_log_priors[perm], cand.label_log_priors)
        l3, g3 = loss_and_grads(inp, tgt, batch, permuted)
        perm_err = max(perm_err, abs(l3 - loss),
                       np.abs(g3.grad_target_embed.rows[:cand.m] - grads.grad_target_embed.rows[perm]).max(),
                       np.abs(densify(g3.grad_target_embed) - densify(grads.grad_target_embed)).max(),
                       np.abs(densify(g3.grad_input_embed) - densify(grads.grad_input_embed)).max())

        min_loss = min(min_loss, loss)
        _, cache = forward(inp, tgt, batch, cand)
        B = len(batch)
        mass = (np.exp(cache.samples_logits - cache.Z[:, None]) / B).sum(axis=1)
        norm_err = max(norm_err, np.abs(B * mass + np.exp(cache.labels_logits - cache.Z) - 1).max())
    ok = shift_err <= 1e-10 and perm_err <= 1e-12 and min_loss >= 0 and norm_err <= 1e-9
    verdict("invariance suite", ok,
            f"120 instances: prior shift {shift_err:.1e} (<=1e-10), permutation {perm_err:.1e} (<=1e-12), "
            f"min loss {min_loss:.3f} (>=0), normalization {norm_err:.1e} (<=1e-9)")


@pytest.mark.slow
def test_table1_benchmark():
    cfg = BenchConfig(n_classes=100_000, n_sampled=100, n_embed=300, n_batch=256, iters=20, warmup=2)
    t0 = time.perf_counter()
    records = run_bench(cfg)
    elapsed = time.perf_counter() - t0
    fb = {r.kernel: r.mean_ns for r in records if r.pass_ == "forward_backward"}
    speedup = fb["full"] / fb["sampled"]
    fusion = fb["sampled_naive_bwd"] / fb["sampled"]
    verdict("Table 1 benchmark", speedup >= 10 and fusion >= 1.2 and elapsed < 600,
            f"full/sampled fwd+bwd {speedup:.0f}x (>=10), naive/fused {fusion:.2f}x (>=1.2), "
            f"{cfg.dtype}, run {elapsed:.0f}s (<600)")


def test_end_to_end_training():
    t0 = time.perf_counter()
    cfg = TrainConfig(n_classes=2000, n_embed=32, n_batch=128, n_sampled=32, steps=1000, lr=0.05, seed=7)
    a = train_skipgram(cfg)
    b = train_skipgram(cfg)
    elapsed = time.perf_counter() - t0
    first, last = a.losses[:100].mean(), a.losses[-100:].mean()
    drop = 1 - last / first
    finite = (np.isfinite(a.losses).all() and np.isfinite(a.input_table.matrix).all()
              and np.isfinite(a.target_table.matrix).all())
    identical = a.losses.tobytes() == b.losses.tobytes() and a.log == b.log
    verdict("end-to-end training", drop >= 0.2 and finite and identical and elapsed < 120,
            f"first-100 mean {first:.4f}, last-100 mean {last:.4f}, drop {100 * drop:.1f}% (>=20%), "
            f"finite={finite}, bitwise repeat={identical}, {elapsed:.1f}s for two runs")


def test_sampler_statistics():
    sums = [math.fsum(prob(CandidateDist(LOG_UNIFORM, n), np.arange(n))) for n in (16, 1000, 100_000, 10**6)]
    sum_err = max(abs(s - 1) for s in sums)
    pvals = {}
    for kind in (UNIFORM, LOG_UNIFORM):
        dist = CandidateDist(kind, 16)
        ids = sample_ids(dist, 10**5, 99)
        expected = prob(dist, np.arange(16)) * ids.size
        pvals[kind] = stats.chisquare(np.bincount(ids, minlength=16), expected).pvalue
    verdict("sampler statistics", sum_err <= 1e-9 and min(pvals.values()) > 0.001,
            f"log-uniform sum error {sum_err:.1e} (<=1e-9), chi-square p-values "
            + ", ".join(f"{k}={v:.3f}" for k, v in pvals.items()) + " (>0.001)")
