#!/usr/bin/env python3
"""Grid search for the TV regularization weight.

Reconstructs synthetic blob scenes from Hadamard measurements over a lambda
grid and reports mean PSNR per (sampling ratio, lambda). The default lambda
in configs/default.json was picked with this script.

Usage: python scripts/tv_lambda_grid.py [--side 64] [--scenes 8]
"""

import argparse

import numpy as np

import spixseg


def blob_scene(side: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    scene = np.full((side, side), 0.1)
    cy, cx = rng.uniform(0.3, 0.7, size=2) * side
    r = rng.uniform(0.15, 0.3) * side
    yy, xx = np.mgrid[0:side, 0:side]
    scene[np.hypot(xx - cx, yy - cy) < r] = 0.85
    inner = rng.uniform(0.4, 0.6) * r
    scene[np.hypot(xx - cx, yy - cy) < inner] = 0.95
    return scene


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--side", type=int, default=64)
    ap.add_argument("--scenes", type=int, default=8)
    ap.add_argument("--ratios", type=float, nargs="+", default=[1.0, 0.2, 0.05, 0.01])
    ap.add_argument("--lambdas", type=float, nargs="+",
                    default=[1e-4, 1e-3, 1e-2, 5e-2, 1e-1])
    ap.add_argument("--iters", type=int, default=150)
    args = ap.parse_args()

    pixels = args.side * args.side
    scenes = [blob_scene(args.side, 1000 + i) for i in range(args.scenes)]

    print(f"{'ratio':>8} " + " ".join(f"lam={lam:g}".rjust(12) for lam in args.lambdas))
    best = {}
    for ratio in args.ratios:
        n = spixseg.sampling_count(ratio, pixels)
        bank = spixseg.make_hadamard_patterns(n, args.side, args.side)
        row = []
        for lam in args.lambdas:
            psnrs = []
            for scene in scenes:
                meas = spixseg.simulate_measurements(scene, bank)
                image, _, _, _ = spixseg.tv_reconstruct(
                    meas, bank, lambda_=lam, max_iters=args.iters
                )
                mse = float(np.mean((image - scene) ** 2))
                psnrs.append(10 * np.log10(1.0 / mse))
            row.append(float(np.mean(psnrs)))
        print(f"{ratio:8g} " + " ".join(f"{p:10.2f}dB" for p in row))
        best[ratio] = args.lambdas[int(np.argmax(row))]

    print("\nbest lambda per ratio:", {k: f"{v:g}" for k, v in best.items()})


if __name__ == "__main__":
    main()
