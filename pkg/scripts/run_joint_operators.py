#!/usr/bin/env python3
"""Joint multi-operator experiment: one model trained on Gaussian smoothing
plus blind denoising (2-d conditioning: operator id + rescaled parameter)
versus the two per-operator models, evaluated on the same test set."""

import argparse
import time

import numpy as np

from opnet.checkpoint import save_checkpoint
from opnet.synth import generate_corpus
from opnet.training import TrainConfig, evaluate, train


def train_model(operators, args, seed):
    cfg = TrainConfig(
        operators=operators,
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
    print(f"  trained {operators} in {time.time() - t0:.0f}s")
    return ckpt


def score(ckpt, test, label):
    g_rows = evaluate(ckpt, test, [0.5, 1.0, 2.0], operator="gaussian")
    d_rows = evaluate(ckpt, test, [15 / 255, 25 / 255, 50 / 255], operator="denoise")
    g = float(np.mean([r["psnr"] for r in g_rows]))
    d = float(np.mean([r["psnr"] for r in d_rows]))
    print(f"{label}: gaussian {g:.2f} dB, denoise {d:.2f} dB")
    return g, d


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--iterations", type=int, default=12000)
    ap.add_argument("--channels", type=int, default=12)
    ap.add_argument("--patch", type=int, default=64)
    ap.add_argument("--lr", type=float, default=1e-3)
    ap.add_argument("--test-images", type=int, default=8)
    ap.add_argument("--test-seed", type=int, default=777)
    ap.add_argument("--save-prefix", default=None)
    args = ap.parse_args()

    test = generate_corpus(args.test_images, 64, seed=args.test_seed, flat_fraction=0.0)

    print("training per-operator models")
    g_ckpt = train_model(["gaussian"], args, seed=1)
    d_ckpt = train_model(["denoise"], args, seed=2)
    print("training joint model")
    joint = train_model(["gaussian", "denoise"], args, seed=3)
    if args.save_prefix:
        save_checkpoint(g_ckpt, f"{args.save_prefix}_gaussian.ckpt")
        save_checkpoint(d_ckpt, f"{args.save_prefix}_denoise.ckpt")
        save_checkpoint(joint, f"{args.save_prefix}_joint.ckpt")

    g_solo = evaluate(g_ckpt, test, [0.5, 1.0, 2.0])
    d_solo = evaluate(d_ckpt, test, [15 / 255, 25 / 255, 50 / 255])
    solo_avg = float(np.mean([r["psnr"] for r in g_solo + d_solo]))
    print(f"per-operator average: {solo_avg:.2f} dB")
    gj, dj = score(joint, test, "joint model")
    joint_avg = (gj + dj) / 2
    print(f"joint average: {joint_avg:.2f} dB (loss vs per-operator: {solo_avg - joint_avg:.2f} dB)")


if __name__ == "__main__":
    main()
