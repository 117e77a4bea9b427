#!/usr/bin/env python3
"""Step-latency comparison between the small tied decoder and the LSTM
baseline at benchmark scale (both with a 4096-token vocabulary)."""

import argparse

import numpy as np

from rnntdec import init_weights, preset, step_flops
from rnntdec.bench import bench_decoder


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=10_000)
    ap.add_argument("--warmup", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--f8", action="store_true", help="use float64 storage (default float32)")
    args = ap.parse_args()

    dtype = np.float64 if args.f8 else np.float32
    names = ["lstm", "reduced_small"]
    configs = {name: preset(name) for name in names}
    weights = {name: init_weights(cfg, seed=args.seed, dtype=dtype) for name, cfg in configs.items()}

    records = {}
    for name in names:
        records[name] = bench_decoder(
            name, weights[name], configs[name], args.runs, args.warmup, seed=args.seed
        )
        r = records[name]
        print(f"{name:<14} {r.mean_ms:8.3f} ms +/- {r.std_ms:.3f}  "
              f"({step_flops(configs[name]):,} flops/step, {args.runs} runs)")
    speedup = records["lstm"].mean_ms / records["reduced_small"].mean_ms
    flops = step_flops(configs["lstm"]) / step_flops(configs["reduced_small"])
    print(f"speedup reduced_small vs lstm: {speedup:.2f}x (flop ratio {flops:.2f}x)")
    print(f"core: {records['lstm'].core_label}")


if __name__ == "__main__":
    main()
