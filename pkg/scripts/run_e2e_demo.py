#!/usr/bin/env python3
"""End-to-end loopback demo: request a fixture page, broadcast it
through the lossy channel at a chosen RSSI, and dump the concealed
raster the client would display."""

import argparse
import tempfile
from pathlib import Path

from PIL import Image

from sonic.client import classify_completion
from sonic.loopback import LoopbackSystem


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--rssi", type=float, default=-88.0)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--url", default="https://example.org")
    p.add_argument("--out-dir", default="e2e_demo_out")
    args = p.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        lb = LoopbackSystem(store_path=Path(tmp) / "client.db", rssi_dbm=args.rssi, seed=args.seed)
        ack = lb.submit(f"url {args.url}")
        print("uplink:", ack)
        lb.run_until_idle(max_seconds=3600, step=2.0)
        if not lb.received:
            print("nothing received (transmission lost entirely)")
            return
        for item in lb.received:
            verdict = classify_completion(item).value
            print(f"item {item.request_id}: {item.metadata.source} "
                  f"loss={item.loss_percent:.1f}% -> {verdict}")
            if item.raster is not None:
                path = out / f"item_{item.request_id}_loss{item.loss_percent:.0f}.png"
                Image.fromarray(item.raster).save(path)
                print(f"  wrote {path}")


if __name__ == "__main__":
    main()
