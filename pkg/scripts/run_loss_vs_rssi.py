#!/usr/bin/env python3
"""Sweep RSSI against per-transmission frame loss (the deployment
loss-vs-signal picture) and write a CSV of per-seed losses per bin."""

import argparse
import csv

import numpy as np

from sonic import channel


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--out", default="loss_vs_rssi.csv")
    p.add_argument("--frames", type=int, default=120, help="frames per transmission")
    p.add_argument("--seeds", type=int, default=200)
    p.add_argument("--rssi-lo", type=float, default=-105)
    p.add_argument("--rssi-hi", type=float, default=-50)
    p.add_argument("--rssi-step", type=float, default=5)
    args = p.parse_args()

    rssi_values = list(np.arange(args.rssi_lo, args.rssi_hi + 0.1, args.rssi_step))
    sweep = channel.sweep_loss(rssi_values, args.frames, args.seeds)

    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["rssi_dbm", "seed", "loss_fraction"])
        for rssi, losses in sweep.items():
            for seed, loss in enumerate(losses):
                w.writerow([rssi, seed, f"{loss:.6f}"])

    print(f"{'rssi':>6} {'median':>8} {'p10':>8} {'p90':>8}")
    for rssi in rssi_values:
        losses = sweep[rssi]
        print(f"{rssi:>6.0f} {np.median(losses):>8.3f} "
              f"{np.percentile(losses, 10):>8.3f} {np.percentile(losses, 90):>8.3f}")
    print(f"\nwrote {args.out}")


if __name__ == "__main__":
    main()
