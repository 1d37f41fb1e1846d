"""Command-line entry point: ``bench``, ``gradcheck`` and ``train`` subcommands."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .bench import KERNELS, BenchConfig, ResourceError, emit_jsonl, emit_plot_svg, run_bench
from .gradcheck import GradConfig, GradcheckError, check_sampled
from .train import TrainConfig, TrainingError, train_skipgram

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _nonneg_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _nonneg_float(text):
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def _kernel_list(text):
    names = tuple(k.strip() for k in text.split(",") if k.strip())
    bad = [k for k in names if k not in KERNELS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown kernels {bad}; choose from {','.join(KERNELS)}")
    return names


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sampled-softmax", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="time full vs sampled softmax loss kernels")
    b.add_argument("--classes", type=_positive_int, default=100_000)
    b.add_argument("--sampled", type=_positive_int, default=100)
    b.add_argument("--embed", type=_positive_int, default=300)
    b.add_argument("--batch", type=_positive_int, default=256)
    b.add_argument("--iters", type=_positive_int, default=20)
    b.add_argument("--warmup", type=_nonneg_int, default=2)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--dtype", choices=("f32", "f64"), default="f32")
    b.add_argument("--kernels", type=_kernel_list, default=KERNELS)
    b.add_argument("--out", required=True, help="JSONL results path")
    b.add_argument("--svg", help="optional bar chart path")

    g = sub.add_parser("gradcheck", help="finite-difference check of the sampled loss gradients")
    g.add_argument("--classes", type=_positive_int, default=20)
    g.add_argument("--sampled", type=_positive_int, default=8)
    g.add_argument("--embed", type=_positive_int, default=4)
    g.add_argument("--batch", type=_positive_int, default=4)
    g.add_argument("--trials", type=_positive_int, default=5)
    g.add_argument("--seed", type=int, default=3)
    g.add_argument("--rtol", type=_nonneg_float, default=1e-5)
    g.add_argument("--atol", type=_nonneg_float, default=1e-8)

    t = sub.add_parser("train", help="toy SkipGram training on a synthetic Zipf corpus")
    t.add_argument("--classes", type=_positive_int, default=2000)
    t.add_argument("--embed", type=_positive_int, default=32)
    t.add_argument("--batch", type=_positive_int, default=128)
    t.add_argument("--sampled", type=_positive_int, default=32)
    t.add_argument("--steps", type=_positive_int, default=1000)
    t.add_argument("--lr", type=_nonneg_float, default=0.05)
    t.add_argument("--seed", type=int, default=7)
    t.add_argument("--log", help="write (step, loss) JSONL here")
    return parser


def cmd_bench(args) -> int:
    cfg = BenchConfig(args.classes, args.sampled, args.embed, args.batch, args.iters,
                      args.warmup, args.seed, args.dtype, tuple(args.kernels))
    records = run_bench(cfg)
    emit_jsonl(records, args.out)
    if args.svg:
        emit_plot_svg(records, args.svg)
    for r in records:
        print(f"{r.kernel:>18} {r.pass_:>16}  mean {r.mean_ns / 1e6:10.3f} ms  "
              f"p50 {r.p50_ns / 1e6:10.3f} ms  p95 {r.p95_ns / 1e6:10.3f} ms")
    means = {(r.kernel, r.pass_): r.mean_ns for r in records}
    fb = "forward_backward"
    if ("full", fb) in means and ("sampled", fb) in means:
        print(f"full / sampled (fwd+bwd): {means['full', fb] / means['sampled', fb]:.1f}x")
    if ("sampled_naive_bwd", fb) in means and ("sampled", fb) in means:
        print(f"naive / fused backward (fwd+bwd): "
              f"{means['sampled_naive_bwd', fb] / means['sampled', fb]:.2f}x")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    cfg = GradConfig(args.classes, args.embed, args.batch, args.sampled)
    ok = True
    for k in range(args.trials):
        report = check_sampled(cfg, args.seed + k, rtol=args.rtol, atol=args.atol)
        print(f"trial {k} (seed {args.seed + k}): {report.summary()}")
        ok &= report.passed
    return EXIT_OK if ok else EXIT_FAIL


def cmd_train(args) -> int:
    cfg = TrainConfig(args.classes, args.embed, args.batch, args.sampled, args.steps,
                      args.lr, args.seed)
    result = train_skipgram(cfg)
    for step, loss in result.log:
        print(f"step {step:6d}  loss {loss:.6f}")
    if args.log:
        with open(args.log, "w", encoding="utf-8", newline="\n") as f:
            for step, loss in result.log:
                f.write(json.dumps({"step": step, "loss": loss}) + "\n")
    window = min(100, cfg.steps)
    first, last = result.losses[:window].mean(), result.losses[-window:].mean()
    print(f"mean loss first {window} steps {first:.6f}, last {window} steps {last:.6f} "
          f"({100 * (1 - last / first):.1f}% lower)")
    return EXIT_OK


COMMANDS = {"bench": cmd_bench, "gradcheck": cmd_gradcheck, "train": cmd_train}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ResourceError, GradcheckError, TrainingError, OSError, MemoryError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
