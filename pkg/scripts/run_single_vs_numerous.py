#!/usr/bin/env python3
"""Single-vs-numerous experiment on Gaussian smoothing.

Trains one model per fixed sigma plus one model over the continuous sigma
range, evaluates all of them on held-out synthetic images and prints the
comparison table (and optionally a CSV).
"""

import argparse
import time

import numpy as np

from opnet.checkpoint import save_checkpoint
from opnet.synth import generate_corpus
from opnet.training import TrainConfig, comparison_table, evaluate, train, write_eval_csv


def train_model(bounds, args, seed):
    cfg = TrainConfig(
        operators=["gaussian"],
        bounds_override={"gaussian": (bounds,)},
        channels=args.channels,
        patch_size=args.patch,
        image_size=args.patch,
        corpus_images=0,
        iterations=args.iterations,
        learning_rate=args.lr,
        seed=seed,
        flat_fraction=0.03,
        log_interval=max(1, args.iterations // 10),
    )
    t0 = time.time()
    ckpt = train(cfg)
    print(f"  trained bounds={bounds} in {time.time() - t0:.0f}s")
    return ckpt


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sigmas", default="0.5,1.0,2.0")
    ap.add_argument("--iterations", type=int, default=12000)
    ap.add_argument("--single-iterations", type=int, default=None)
    ap.add_argument("--channels", type=int, default=12)
    ap.add_argument("--patch", type=int, default=64)
    ap.add_argument("--lr", type=float, default=1e-3)
    ap.add_argument("--test-images", type=int, default=8)
    ap.add_argument("--test-seed", type=int, default=777)
    ap.add_argument("--out", default=None, help="CSV output path")
    ap.add_argument("--save-prefix", default=None, help="save checkpoints as <prefix>_*.ckpt")
    args = ap.parse_args()

    sigmas = [float(s) for s in args.sigmas.split(",")]
    test = generate_corpus(args.test_images, 64, seed=args.test_seed, flat_fraction=0.0)

    single_iters = args.single_iterations or args.iterations
    single_rows = []
    for i, s in enumerate(sigmas):
        print(f"training single model at sigma={s}")
        saved = args.iterations
        args.iterations = single_iters
        ckpt = train_model((s, s), args, seed=1 + i)
        args.iterations = saved
        row = evaluate(ckpt, test, [s])[0]
        single_rows.append(row)
        if args.save_prefix:
            save_checkpoint(ckpt, f"{args.save_prefix}_single_{s:g}.ckpt")

    print("training continuously-sampled model")
    numerous = train_model((min(sigmas), max(sigmas)), args, seed=11)
    numerous_rows = evaluate(numerous, test, sigmas)
    if args.save_prefix:
        save_checkpoint(numerous, f"{args.save_prefix}_numerous.ckpt")

    table = comparison_table(single_rows, numerous_rows)
    print(f"\n{'sigma':>8} {'single':>8} {'numerous':>9} {'diff':>6}")
    for r in table:
        print(
            f"{r['gamma']:>8.3f} {r['psnr_single']:>8.2f} "
            f"{r['psnr_numerous']:>9.2f} {r['diff']:>6.2f}"
        )
    print(f"{'ave.':>8} {np.mean([r['psnr_single'] for r in table]):>8.2f} "
          f"{np.mean([r['psnr_numerous'] for r in table]):>9.2f} "
          f"{np.mean([r['diff'] for r in table]):>6.2f}")
    if args.out:
        write_eval_csv(args.out, table)
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
