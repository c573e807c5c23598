"""Receiver daemon: PCM in, browsable items out.

The ingest pipeline demodulates a PCM stream, FEC-recovers slots,
regroups frames per transmission, reassembles the container, rebuilds
webpage rasters from intact strips, conceals missing pixel bands, and
persists items to a small SQLite store with one-day idle eviction.
Keepalives refresh a "server online" flag with a 15 s expiry.

Concealment rule (text reads left to right, so left neighbours are the
best predictors): a missing pixel copies the nearest received pixel to
its left in the same row; a missing run starting at column 0 copies the
row above (already concealed); the very first pixels fall back to
mid-gray.
"""

from __future__ import annotations

import io
import json
import sqlite3
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image

from sonic import format as sf
from sonic import modem as modem_mod
from sonic import pipeline
from sonic.fec import FecConfig, DEFAULT_FEC
from sonic.format import ClickMapEntry, ContentType, SonicMetadata
from sonic.modem import Demodulator, ModulationProfile, PcmChunk
from sonic.renderer import decode_strip_payload

ONLINE_EXPIRY_S = 15.0
EVICT_AFTER_S = 24 * 3600.0
PARTIAL_VIEWABLE_MAX_LOSS = 50.0
MID_GRAY = 128


class Completion(Enum):
    COMPLETE = "complete"
    PARTIAL_VIEWABLE = "partial_viewable"
    FAILED = "failed"


@dataclass
class ReceivedItem:
    metadata: SonicMetadata
    click_map: list[ClickMapEntry]
    raster: np.ndarray | None  # concealed image for WEBPAGE
    text: str | None  # decoded text for LLM_TEXT
    loss_percent: float
    complete: bool
    received_at: float
    last_accessed: float

    @property
    def request_id(self) -> int:
        return self.metadata.request_id

    @property
    def kind(self) -> str:
        return "url" if self.metadata.content_type == ContentType.WEBPAGE else "gpt"


def conceal(raster: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Fill missing pixels; received pixels are never altered."""
    if mask.shape != raster.shape[:2]:
        raise ValueError("mask shape must match raster rows/cols")
    out = raster.copy()
    if not mask.any():
        return out
    h, w = mask.shape
    flat = out.reshape(h, w, -1)
    cols = np.arange(w)
    prev_row = np.full((w, flat.shape[2]), MID_GRAY, dtype=flat.dtype)
    for r in range(h):
        row_mask = mask[r]
        row = flat[r]
        if row_mask.any():
            # index of the nearest received pixel at or left of each column
            src = np.where(~row_mask, cols, -1)
            np.maximum.accumulate(src, out=src)
            fill = np.where(src[:, None] >= 0, row[np.clip(src, 0, None)], prev_row)
            flat[r] = np.where(row_mask[:, None], fill, row)
        prev_row = flat[r]
    return out


def classify_completion(item: ReceivedItem) -> Completion:
    if item.loss_percent == 0.0:
        return Completion.COMPLETE
    if item.metadata.content_type == ContentType.LLM_TEXT:
        return Completion.FAILED
    if item.loss_percent <= PARTIAL_VIEWABLE_MAX_LOSS:
        return Completion.PARTIAL_VIEWABLE
    return Completion.FAILED


def map_click(item: ReceivedItem, x_screen: float, y_screen: float, screen_width: float) -> str | None:
    """Hit-test a tap against the click map; None when nothing is hit."""
    if item.metadata.content_type != ContentType.WEBPAGE or screen_width <= 0:
        return None
    s = screen_width / sf.IMAGE_WIDTH
    x = x_screen / s
    y = y_screen / s
    hits = [
        e
        for e in item.click_map
        if e.x <= x < e.x + e.w and e.y <= y < e.y + e.h
    ]
    if not hits:
        return None
    hits.sort(key=lambda e: (e.y, item.click_map.index(e)))
    return hits[0].target_url


def build_item(decoded: sf.DecodedTransmission, now: float) -> ReceivedItem:
    meta = decoded.metadata
    loss = decoded.reassembly.loss_percent
    raster = None
    text = None
    if meta.content_type == ContentType.WEBPAGE:
        img, mask = decode_strip_payload(
            decoded.payload,
            decoded.reassembly.missing_mask,
            meta.image_height,
            max(meta.strip_height, 1),
        )
        raster = conceal(img, mask)
    else:
        if decoded.reassembly.complete:
            text = decoded.payload.decode("utf-8", errors="replace")
    return ReceivedItem(
        metadata=meta,
        click_map=decoded.click_map,
        raster=raster,
        text=text,
        loss_percent=loss,
        complete=decoded.reassembly.complete,
        received_at=now,
        last_accessed=now,
    )


class ClientStore:
    """SQLite-backed item store with one-day idle eviction."""

    def __init__(self, path: str | Path):
        self.path = str(path)
        with self._conn() as c:
            c.execute(
                """CREATE TABLE IF NOT EXISTS items (
                    request_id INTEGER PRIMARY KEY,
                    kind TEXT NOT NULL,
                    subject TEXT NOT NULL,
                    loss_percent REAL NOT NULL,
                    complete INTEGER NOT NULL,
                    received_at REAL NOT NULL,
                    last_accessed REAL NOT NULL,
                    meta_json TEXT NOT NULL,
                    click_map_json TEXT NOT NULL,
                    image_png BLOB,
                    text TEXT
                )"""
            )

    def _conn(self):
        return sqlite3.connect(self.path)

    def store(self, item: ReceivedItem) -> None:
        png = None
        if item.raster is not None:
            buf = io.BytesIO()
            Image.fromarray(item.raster).save(buf, format="PNG")
            png = buf.getvalue()
        meta = item.metadata
        with self._conn() as c:
            c.execute(
                "REPLACE INTO items VALUES (?,?,?,?,?,?,?,?,?,?,?)",
                (
                    meta.request_id,
                    item.kind,
                    meta.source,
                    item.loss_percent,
                    int(item.complete),
                    item.received_at,
                    item.last_accessed,
                    json.dumps(
                        {
                            "content_type": int(meta.content_type),
                            "payload_length": meta.payload_length,
                            "frame_count": meta.frame_count,
                            "image_width": meta.image_width,
                            "image_height": meta.image_height,
                            "strip_height": meta.strip_height,
                            "source": meta.source,
                            "created_at": meta.created_at,
                        }
                    ),
                    json.dumps(
                        [
                            {"x": e.x, "y": e.y, "w": e.w, "h": e.h, "url": e.target_url}
                            for e in item.click_map
                        ]
                    ),
                    png,
                    item.text,
                ),
            )

    def list_items(self) -> list[dict]:
        with self._conn() as c:
            rows = c.execute(
                "SELECT request_id, kind, subject, loss_percent, complete,"
                " received_at, last_accessed FROM items ORDER BY received_at DESC"
            ).fetchall()
        out = []
        for r in rows:
            loss = r[3]
            if loss == 0.0:
                completion = Completion.COMPLETE
            elif r[1] == "url" and loss <= PARTIAL_VIEWABLE_MAX_LOSS:
                completion = Completion.PARTIAL_VIEWABLE
            else:
                completion = Completion.FAILED
            out.append(
                {
                    "id": r[0],
                    "kind": r[1],
                    "subject": r[2],
                    "loss_percent": loss,
                    "complete": bool(r[4]),
                    "completion": completion.value,
                    "received_at": r[5],
                    "last_accessed": r[6],
                }
            )
        return out

    def get_item(self, request_id: int, now: float | None = None) -> ReceivedItem | None:
        """Fetch an item and bump its last_accessed."""
        now = time.time() if now is None else now
        with self._conn() as c:
            row = c.execute(
                "SELECT meta_json, click_map_json, image_png, text, loss_percent,"
                " complete, received_at, last_accessed FROM items WHERE request_id=?",
                (request_id,),
            ).fetchone()
            if row is None:
                return None
            c.execute(
                "UPDATE items SET last_accessed=? WHERE request_id=?", (now, request_id)
            )
        meta_d = json.loads(row[0])
        meta = SonicMetadata(
            request_id=request_id,
            content_type=ContentType(meta_d["content_type"]),
            payload_length=meta_d["payload_length"],
            frame_count=meta_d["frame_count"],
            image_width=meta_d["image_width"],
            image_height=meta_d["image_height"],
            strip_height=meta_d["strip_height"],
            source=meta_d["source"],
            created_at=meta_d["created_at"],
        )
        raster = None
        if row[2]:
            raster = np.asarray(Image.open(io.BytesIO(row[2])).convert("RGB"))
        return ReceivedItem(
            metadata=meta,
            click_map=[
                ClickMapEntry(x=d["x"], y=d["y"], w=d["w"], h=d["h"], target_url=d["url"])
                for d in json.loads(row[1])
            ],
            raster=raster,
            text=row[3],
            loss_percent=row[4],
            complete=bool(row[5]),
            received_at=row[6],
            last_accessed=now,
        )

    def get_image_png(self, request_id: int, now: float | None = None) -> bytes | None:
        now = time.time() if now is None else now
        with self._conn() as c:
            row = c.execute(
                "SELECT image_png FROM items WHERE request_id=?", (request_id,)
            ).fetchone()
            if row is None:
                return None
            c.execute("UPDATE items SET last_accessed=? WHERE request_id=?", (now, request_id))
        return row[0]

    def evict(self, now: float | None = None) -> int:
        """Drop items idle for more than a day; returns eviction count."""
        now = time.time() if now is None else now
        with self._conn() as c:
            cur = c.execute(
                "DELETE FROM items WHERE last_accessed < ?", (now - EVICT_AFTER_S,)
            )
            return cur.rowcount


@dataclass
class IngestStats:
    transmissions: int = 0
    items: int = 0
    keepalives: int = 0
    discarded_metadata_loss: int = 0


class IngestPipeline:
    """Serial PCM -> items pipeline; one instance per PCM source."""

    def __init__(
        self,
        store: ClientStore,
        profile: ModulationProfile | None = None,
        fec_cfg: FecConfig = DEFAULT_FEC,
        clock=time.time,
    ):
        self.store = store
        self.profile = profile or modem_mod.DEFAULT_PROFILE
        self.fec_cfg = fec_cfg
        self.clock = clock
        self.demod = Demodulator(self.profile)
        self.stats = IngestStats()
        self.online_until = 0.0

    @property
    def online(self) -> bool:
        return self.clock() <= self.online_until

    def push_pcm(self, chunk: PcmChunk | np.ndarray) -> list[ReceivedItem]:
        items = []
        for channel_bytes, _report in self.demod.push(chunk):
            item = self._handle_transmission(channel_bytes)
            if item is not None:
                items.append(item)
        return items

    def push_slots(self, slots: list[bytes]) -> ReceivedItem | None:
        """Fast path: surviving raw frames from the frame-level channel."""
        frames = pipeline.parse_frame_blobs(slots)
        return self._handle_frames(frames)

    def _handle_transmission(self, channel_bytes: bytes) -> ReceivedItem | None:
        decode = pipeline.decode_channel_bytes(channel_bytes, self.fec_cfg)
        self.stats.transmissions += 1
        if decode.keepalive:
            self.stats.keepalives += 1
            self.online_until = self.clock() + ONLINE_EXPIRY_S
            return None
        return self._handle_frames(decode.frames)

    def _handle_frames(self, frames: list[sf.Frame]) -> ReceivedItem | None:
        live = [f for f in frames if not f.is_keepalive]
        if not live:
            if frames:  # pure keepalive arrived via the fast path
                self.stats.keepalives += 1
                self.online_until = self.clock() + ONLINE_EXPIRY_S
            return None
        frames = live
        now = self.clock()
        self.online_until = now + ONLINE_EXPIRY_S
        try:
            decoded = sf.decode_transmission(frames)
        except sf.FormatError:
            self.stats.discarded_metadata_loss += 1
            return None
        item = build_item(decoded, now)
        self.store.store(item)
        self.stats.items += 1
        return item


def ingest_wav_files(paths, store: ClientStore, **kw) -> list[ReceivedItem]:
    pipe = IngestPipeline(store, **kw)
    items = []
    for path in paths:
        items.extend(pipe.push_pcm(modem_mod.read_wav(path)))
    return items


def create_app(store: ClientStore, pipe: IngestPipeline | None = None, uplink=None, static_dir=None):
    """Local HTTP API consumed by the web UI.

    `uplink` is a callable(body: str) -> dict forwarding requests to the
    head-end; it returns the acknowledgement payload verbatim.
    """
    from fastapi import FastAPI, HTTPException
    from fastapi.responses import Response

    app = FastAPI(title="sonic-client")

    @app.get("/items")
    def items():
        return {"items": store.list_items()}

    @app.get("/items/{item_id}/meta")
    def item_meta(item_id: int):
        item = store.get_item(item_id)
        if item is None:
            raise HTTPException(404, "no such item")
        completion = classify_completion(item).value
        return {
            "id": item.request_id,
            "kind": item.kind,
            "subject": item.metadata.source,
            "loss_percent": item.loss_percent,
            "completion": completion,
            "image_width": item.metadata.image_width,
            "image_height": item.metadata.image_height,
            "click_map": [
                {"x": e.x, "y": e.y, "w": e.w, "h": e.h, "url": e.target_url}
                for e in item.click_map
            ],
            "text": item.text,
        }

    @app.get("/items/{item_id}/image")
    def item_image(item_id: int):
        png = store.get_image_png(item_id)
        if png is None:
            raise HTTPException(404, "no image for this item")
        return Response(content=png, media_type="image/png")

    @app.post("/click")
    def click(body: dict):
        item = store.get_item(int(body["id"]))
        if item is None:
            raise HTTPException(404, "no such item")
        url = map_click(item, float(body["x"]), float(body["y"]), float(body["screen_width"]))
        return {"target_url": url}

    @app.post("/request")
    def request(body: dict):
        if uplink is None:
            raise HTTPException(503, "uplink not configured")
        return uplink(str(body["body"]))

    @app.get("/online")
    def online():
        return {"online": bool(pipe.online) if pipe is not None else False}

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    return app
