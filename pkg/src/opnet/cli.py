"""Command-line entry points.

Exit codes: 0 success, 2 invalid input (bad parameters, missing operators,
unreadable files), 1 unexpected failure.  Every error prints a one-line
diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np


def _parse_gammas(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"could not parse gamma list {text!r}")
    if not values:
        raise ValueError("empty gamma list")
    return values


def _parse_point(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"point must be 'x,y', got {text!r}")
    return int(parts[0]), int(parts[1])


def _load_test_images(testdir: str):
    from .imageio import load_image

    paths = sorted(
        p for p in Path(testdir).iterdir() if p.suffix.lower() in (".png", ".ppm")
    )
    if not paths:
        raise ValueError(f"no .png/.ppm images in {testdir}")
    return [load_image(p) for p in paths]


def cmd_train(args) -> int:
    from .checkpoint import save_checkpoint
    from .training import load_config, train

    config = load_config(args.config)
    if args.out:
        config.checkpoint_path = args.out
    ckpt = train(config)
    out = config.checkpoint_path
    if out is None:
        out = "model.ckpt"
        save_checkpoint(ckpt, out)
    print(f"trained {ckpt.iteration} iterations -> {out}")
    return 0


def cmd_eval(args) -> int:
    from .checkpoint import load_checkpoint
    from .training import comparison_table, evaluate, write_eval_csv

    ckpt = load_checkpoint(args.checkpoint)
    gammas = _parse_gammas(args.gammas)
    images = _load_test_images(args.testdir)
    rows = evaluate(ckpt, images, gammas, operator=args.operator, seed=args.seed)
    if args.baseline:
        base = load_checkpoint(args.baseline)
        base_rows = evaluate(base, images, gammas, operator=args.operator, seed=args.seed)
        table = comparison_table(base_rows, rows)
        header = f"{'gamma':>10} {'psnr_single':>12} {'psnr_numerous':>14} {'diff':>8}"
        print(header)
        for r in table:
            print(
                f"{r['gamma']:>10.4f} {r['psnr_single']:>12.2f} "
                f"{r['psnr_numerous']:>14.2f} {r['diff']:>8.2f}"
            )
    else:
        table = rows
        print(f"{'gamma':>10} {'psnr':>8} {'ssim':>8}")
        for r in rows:
            print(f"{r['gamma']:>10.4f} {r['psnr']:>8.2f} {r['ssim']:>8.4f}")
    if args.out:
        write_eval_csv(args.out, table)
        print(f"wrote {args.out}")
    return 0


def cmd_infer(args) -> int:
    from .checkpoint import load_checkpoint
    from .inference import infer_png

    ckpt = load_checkpoint(args.checkpoint)
    payload = Path(args.image).read_bytes()
    reference = Path(args.reference).read_bytes() if args.reference else None
    out_bytes, p, s = infer_png(ckpt, payload, args.operator, args.param, reference)
    out = args.out or (Path(args.image).stem + "_out.png")
    Path(out).write_bytes(out_bytes)
    msg = f"wrote {out}"
    if p is not None:
        msg += f" PSNR={p:.4f} SSIM={s:.6f}"
    print(msg)
    return 0


def cmd_analyze_rf(args) -> int:
    from . import analysis
    from .checkpoint import load_checkpoint
    from .imageio import load_image, save_png

    ckpt = load_checkpoint(args.checkpoint)
    image = load_image(args.image)
    point = _parse_point(args.point)
    gammas = _parse_gammas(args.gammas)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    print(f"{'gamma':>10} {'area':>8}")
    for g in gammas:
        rf = analysis.effective_receptive_field(ckpt, image, g, point, args.operator)
        overlay = analysis.rf_overlay(image, rf.mask)
        stem = f"rf_x{point[0]}_y{point[1]}_g{g:g}"
        save_png(outdir / f"{stem}.png", overlay)
        analysis.write_mask_csv(outdir / f"{stem}.csv", rf)
        print(f"{g:>10.4f} {rf.area:>8d}")
    print(f"wrote overlays to {outdir}")
    return 0


def cmd_export_trajectory(args) -> int:
    from .checkpoint import load_checkpoint
    from .hypernet import export_weight_trajectory, write_trajectory_csv
    from .training import encode_gamma

    ckpt = load_checkpoint(args.checkpoint)
    spec = ckpt.operator_by_name(args.operator)
    lo, hi = spec.bounds[0]
    if spec.sampling == "log":
        raws = np.exp(np.linspace(np.log(lo), np.log(hi), args.grid))
    else:
        raws = np.linspace(lo, hi, args.grid)
    grid = [encode_gamma(spec, float(r), joint=ckpt.m == 2) for r in raws]
    mat = export_weight_trajectory(ckpt.hp, grid, args.layer, ckpt.config())
    write_trajectory_csv(args.out, grid, mat)
    print(f"wrote {mat.shape[0]}x{mat.shape[1]} trajectory to {args.out}")
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    serve(args.checkpoint, port=args.port, host=args.host, max_side=args.max_side)
    return 0


def cmd_make_corpus(args) -> int:
    from .imageio import save_png
    from .synth import generate_corpus

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for i, img in enumerate(generate_corpus(args.n, args.size, args.seed, args.flat_fraction)):
        save_png(outdir / f"synth_{i:04d}.png", img)
    print(f"wrote {args.n} images to {outdir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opnet",
        description="Parameter-conditioned image operator networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train from a key-value config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="checkpoint output path (overrides config)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="PSNR/SSIM over a gamma grid")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--gammas", required=True, help="comma-separated raw values")
    p.add_argument("--testdir", required=True)
    p.add_argument("--operator", default=None)
    p.add_argument("--baseline", default=None, help="second checkpoint for a single-vs-numerous table")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="CSV output path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help="run one image through a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--operator", default=None)
    p.add_argument("--param", required=True, type=float)
    p.add_argument("--out", default=None)
    p.add_argument("--reference", default=None)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("analyze-rf", help="effective receptive field at a point")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--point", required=True, help="x,y")
    p.add_argument("--gammas", required=True)
    p.add_argument("--operator", default=None)
    p.add_argument("--outdir", default="rf_out")
    p.set_defaults(func=cmd_analyze_rf)

    p = sub.add_parser("export-trajectory", help="dump generated weights over a gamma grid")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--operator", required=True)
    p.add_argument("--grid", type=int, default=100)
    p.add_argument("--layer", type=int, default=1, help="0-based conv layer index")
    p.add_argument("--out", default="trajectory.csv")
    p.set_defaults(func=cmd_export_trajectory)

    p = sub.add_parser("serve", help="run the HTTP inference service")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--max-side", type=int, default=1024)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("make-corpus", help="write synthetic PNG images")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--flat-fraction", type=float, default=0.05)
    p.set_defaults(func=cmd_make_corpus)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # pragma: no cover - unexpected failures
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
