#!/usr/bin/env python3
"""Print the per-tensor size breakdown for the five benchmark presets."""

from rnntdec import param_count, preset, tied_savings
from rnntdec.config import PRESET_NAMES


def main():
    totals = {}
    for name in PRESET_NAMES:
        cfg = preset(name)
        counts = param_count(cfg)
        totals[name] = counts["total"]
        print(f"{name} (variant={cfg.variant}, d_e={cfg.d_e}, N={cfg.history_len}, "
              f"H={cfg.num_heads}, tied={cfg.tied})")
        for tensor, count in counts.items():
            if tensor != "total":
                print(f"  {tensor:<14} {count:>14,}")
        print(f"  {'total':<14} {counts['total']:>14,}")
        if cfg.tied:
            print(f"  tied savings: d_h*|V| = {tied_savings(cfg):,}")
        print()
    order = sorted(totals, key=totals.get, reverse=True)
    print("size ordering:", " > ".join(f"{n} ({totals[n]/1e6:.2f}M)" for n in order))


if __name__ == "__main__":
    main()
