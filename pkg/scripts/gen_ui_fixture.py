#!/usr/bin/env python3
"""Generate the web UI test fixture from the real pipeline: runs a
loopback session, snapshots the client API responses, and precomputes
click resolutions at two viewport widths so the frontend tests exercise
the exact contract the receiver implements."""

import json
import tempfile
from pathlib import Path

from sonic import client as cl
from sonic.loopback import LoopbackSystem

OUT = Path(__file__).resolve().parent.parent / "frontend" / "fixtures" / "ui_fixture.json"


def main():
    with tempfile.TemporaryDirectory() as tmp:
        lb = LoopbackSystem(store_path=Path(tmp) / "c.db", rssi_dbm=-60.0, seed=5)
        lb.submit("url https://example.org", sender="fixture")
        lb.submit("gpt what is malaria", sender="fixture")
        lb.run_until_idle(max_seconds=3600, step=2.0)

        items = lb.store.list_items()
        metas = {}
        clicks = []
        for row in items:
            item = lb.store.get_item(row["id"])
            metas[str(row["id"])] = {
                "id": row["id"],
                "kind": item.kind,
                "subject": item.metadata.source,
                "loss_percent": item.loss_percent,
                "completion": cl.classify_completion(item).value,
                "image_width": item.metadata.image_width,
                "image_height": item.metadata.image_height,
                "click_map": [
                    {"x": e.x, "y": e.y, "w": e.w, "h": e.h, "url": e.target_url}
                    for e in item.click_map
                ],
                "text": item.text,
            }
            if item.kind != "url":
                continue
            for e in item.click_map:
                for width in (320, 640):
                    s = width / 320
                    inside = ((e.x + 1) * s, (e.y + 1) * s)
                    clicks.append(
                        {
                            "id": row["id"],
                            "x": inside[0],
                            "y": inside[1],
                            "screen_width": width,
                            "target_url": cl.map_click(item, inside[0], inside[1], width),
                        }
                    )
            # a miss: top-right corner away from boxes
            for width in (320, 640):
                clicks.append(
                    {
                        "id": row["id"],
                        "x": 318 * width / 320,
                        "y": 1 * width / 320,
                        "screen_width": width,
                        "target_url": cl.map_click(item, 318 * width / 320, width / 320, width),
                    }
                )

        fixture = {"items": items, "metas": metas, "clicks": clicks}
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(fixture, indent=1))
    print(f"wrote {OUT} with {len(items)} items and {len(clicks)} click expectations")


if __name__ == "__main__":
    main()
