"""Broadcast head-end: uplink requests in, scheduled audio out.

Three logical actors share three FIFO queues: the ingester parses
uplink messages into request records, the render/encode worker turns
the head of the work queue into protected slots (screenshots via the
browser endpoint, LLM answers via the completion endpoint, cache
lookups first), and the player drains the player queue strictly inside
the nightly transmission window, falling back to the idle push queue
and then to keepalives.

Everything advances through `tick(now)` with an explicit timestamp, so
tests and the discrete-event replay drive the same code the live loop
does.  Every state transition appends one JSON event; that log is the
input to the queue-simulator cross-validation.

Rendering and encoding run ahead of the window on purpose (nothing
forbids a warm pipeline); only PLAYING is window-gated.
"""

from __future__ import annotations

import json
import sqlite3
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from enum import Enum
from pathlib import Path
from typing import Callable

from sonic import pipeline
from sonic import renderer as rd
from sonic.fec import DEFAULT_FEC, FecConfig, protect as fec_protect
from sonic.format import SonicFile
from sonic.modem import DEFAULT_PROFILE, ModulationProfile

KEEPALIVE_INTERVAL_S = 5.0
QUEUE_BOUND = 10_000
QUOTA_PER_DAY = 10
HUB_SIZE = 20
POPULARITY_WINDOW_DAYS = 7


class RequestState(str, Enum):
    QUEUED = "queued"
    RENDERING = "rendering"
    ENCODED = "encoded"
    PLAYING = "playing"
    DONE = "done"
    FAILED = "failed"


class RejectReason(str, Enum):
    UNKNOWN_TYPE = "unknown_type"
    EMPTY_BODY = "empty_body"
    QUOTA = "quota"
    OVERLOAD = "overload"


@dataclass(frozen=True)
class UplinkMessage:
    sender_id: str
    body: str


@dataclass
class Rejection:
    reason: RejectReason


class UplinkRejected(ValueError):
    def __init__(self, reason: RejectReason):
        super().__init__(reason.value)
        self.reason = reason


@dataclass
class RequestRecord:
    id: int
    kind: str  # "url" | "gpt"
    subject: str
    sender: str
    state: RequestState = RequestState.QUEUED
    enqueue_time: float = 0.0
    play_start: float | None = None
    play_end: float | None = None
    cached: bool = False
    fail_reason: str | None = None
    pushed: bool = False  # idle-time push, not a user request


@dataclass(frozen=True)
class TransmissionWindow:
    start_minute: int = 22 * 60
    end_minute: int = 5 * 60

    @staticmethod
    def parse(start: str = "22:00", end: str = "05:00") -> "TransmissionWindow":
        def minutes(s: str) -> int:
            h, m = s.split(":")
            return int(h) * 60 + int(m)

        return TransmissionWindow(start_minute=minutes(start), end_minute=minutes(end))

    @property
    def wraps(self) -> bool:
        return self.end_minute <= self.start_minute

    def contains(self, minute_of_day: int) -> bool:
        if self.wraps:
            return minute_of_day >= self.start_minute or minute_of_day < self.end_minute
        return self.start_minute <= minute_of_day < self.end_minute

    def length_minutes(self) -> int:
        if self.wraps:
            return 24 * 60 - self.start_minute + self.end_minute
        return self.end_minute - self.start_minute


def normalize_url(raw: str) -> str:
    from urllib.parse import urlsplit, urlunsplit

    candidate = raw.strip()
    if "://" not in candidate:
        candidate = "https://" + candidate
    parts = urlsplit(candidate)
    return urlunsplit(
        (parts.scheme.lower() or "https", parts.netloc.lower(), parts.path, parts.query, "")
    )


def parse_uplink(msg: UplinkMessage) -> tuple[str, str]:
    """Split "<type> <body>" into (kind, normalized subject).

    Raises UplinkRejected for unknown types or empty bodies; quota and
    overload are server-state concerns handled by submit_uplink.
    """
    parts = msg.body.strip().split(None, 1)
    if not parts:
        raise UplinkRejected(RejectReason.EMPTY_BODY)
    kind = parts[0].lower()
    if kind not in ("url", "gpt"):
        raise UplinkRejected(RejectReason.UNKNOWN_TYPE)
    if len(parts) < 2 or not parts[1].strip():
        raise UplinkRejected(RejectReason.EMPTY_BODY)
    body = parts[1].strip()
    return kind, normalize_url(body) if kind == "url" else body


@dataclass
class ServerConfig:
    window: TransmissionWindow = field(default_factory=TransmissionWindow)
    tz_offset_hours: float = 0.0
    quota_per_day: int = QUOTA_PER_DAY
    queue_bound: int = QUEUE_BOUND
    keepalive_interval_s: float = KEEPALIVE_INTERVAL_S
    push_k: int = 3
    hub_size: int = HUB_SIZE
    strip_quality: int = 10
    strip_height: int = 64
    nav_timeout_s: float = 30.0
    fec: FecConfig = field(default_factory=lambda: DEFAULT_FEC)
    profile: ModulationProfile = field(default_factory=lambda: DEFAULT_PROFILE)
    write_wav_dir: str | None = None
    event_log_path: str | None = None
    db_path: str | None = None  # None = in-memory


@dataclass
class PlayerItem:
    record_id: int
    frames: list[bytes]
    slots: list[bytes]
    duration_s: float
    wav_path: str | None = None


@dataclass
class CacheEntry:
    key: tuple[str, str]
    item_template: PlayerItem
    window_id: str


class SonicServer:
    def __init__(
        self,
        config: ServerConfig | None = None,
        browser: rd.Browser | None = None,
        llm: rd.LlmEndpoint | None = None,
        on_air: Callable[[str, PlayerItem | None], None] | None = None,
    ):
        self.config = config or ServerConfig()
        self.browser = browser
        self.llm = llm or rd.StubLlm()
        self.on_air = on_air  # called with ("item"|"keepalive", PlayerItem|None) at play start
        self.screenshot_queue: deque[RequestRecord] = deque()
        self.player_queue: deque[PlayerItem] = deque()
        self.push_queue: deque[tuple[str, int]] = deque()  # (url, origin record id)
        self.records: dict[int, RequestRecord] = {}
        self.cache: dict[tuple[str, str], CacheEntry] = {}
        self.events: list[dict] = []
        self.playing: PlayerItem | None = None
        self.playing_until = 0.0
        self.last_keepalive = float("-inf")
        self._hub_exported_for: str | None = None
        # the HTTP ingester may submit from another thread; the db is
        # guarded by a lock, queues rely on deque's atomic appends
        self._db = sqlite3.connect(self.config.db_path or ":memory:", check_same_thread=False)
        self._db_lock = threading.Lock()
        self._init_db()
        self._next_id = self._load_next_id()

    # -- persistence ----------------------------------------------------

    def _init_db(self) -> None:
        self._db.execute(
            """CREATE TABLE IF NOT EXISTS requests (
                id INTEGER PRIMARY KEY,
                sender TEXT NOT NULL,
                kind TEXT NOT NULL,
                subject TEXT NOT NULL,
                state TEXT NOT NULL,
                local_day TEXT NOT NULL,
                enqueue_time REAL NOT NULL,
                play_start REAL,
                play_end REAL,
                cached INTEGER NOT NULL DEFAULT 0,
                pushed INTEGER NOT NULL DEFAULT 0,
                fail_reason TEXT
            )"""
        )
        self._db.commit()

    def _load_next_id(self) -> int:
        row = self._db.execute("SELECT MAX(id) FROM requests").fetchone()
        return (row[0] or 0) + 1

    def _persist(self, rec: RequestRecord, now: float) -> None:
        with self._db_lock:
            self._db.execute(
                "REPLACE INTO requests VALUES (?,?,?,?,?,?,?,?,?,?,?,?)",
                (
                    rec.id,
                    rec.sender,
                    rec.kind,
                    rec.subject,
                    rec.state.value,
                    self.local_day(rec.enqueue_time),
                    rec.enqueue_time,
                    rec.play_start,
                    rec.play_end,
                    int(rec.cached),
                    int(rec.pushed),
                    rec.fail_reason,
                ),
            )
            self._db.commit()

    # -- clock helpers ----------------------------------------------------

    def _local(self, ts: float) -> datetime:
        tz = timezone(timedelta(hours=self.config.tz_offset_hours))
        return datetime.fromtimestamp(ts, tz)

    def minute_of_day(self, ts: float) -> int:
        d = self._local(ts)
        return d.hour * 60 + d.minute

    def local_day(self, ts: float) -> str:
        return self._local(ts).date().isoformat()

    def in_window(self, ts: float) -> bool:
        return self.config.window.contains(self.minute_of_day(ts))

    def window_id(self, ts: float) -> str:
        # cache scope rolls over when the window closes
        return self.local_day(ts - self.config.window.end_minute * 60)

    # -- event log ----------------------------------------------------

    def _log(self, now: float, type_: str, **fields) -> None:
        event = {
            "t": now,
            "type": type_,
            "depths": {
                "screenshot": len(self.screenshot_queue),
                "player": len(self.player_queue),
                "push": len(self.push_queue),
            },
            **fields,
        }
        self.events.append(event)
        if self.config.event_log_path:
            with open(self.config.event_log_path, "a") as f:
                f.write(json.dumps(event) + "\n")

    def _transition(self, rec: RequestRecord, state: RequestState, now: float, **extra) -> None:
        rec.state = state
        self._persist(rec, now)
        self._log(now, "transition", id=rec.id, state=state.value, kind=rec.kind,
                  cached=rec.cached, pushed=rec.pushed, **extra)

    # -- uplink ----------------------------------------------------

    def quota_used(self, sender: str, ts: float) -> int:
        with self._db_lock:
            row = self._db.execute(
                "SELECT COUNT(*) FROM requests WHERE sender=? AND local_day=? AND pushed=0",
                (sender, self.local_day(ts)),
            ).fetchone()
        return row[0]

    def submit_uplink(self, sender: str, body: str, now: float) -> RequestRecord | Rejection:
        try:
            kind, subject = parse_uplink(UplinkMessage(sender_id=sender, body=body))
        except UplinkRejected as e:
            self._log(now, "rejected", sender=sender, reason=e.reason.value)
            return Rejection(e.reason)
        if sender != "__system__" and self.quota_used(sender, now) >= self.config.quota_per_day:
            self._log(now, "rejected", sender=sender, reason=RejectReason.QUOTA.value)
            return Rejection(RejectReason.QUOTA)
        if len(self.screenshot_queue) >= self.config.queue_bound:
            self._log(now, "rejected", sender=sender, reason=RejectReason.OVERLOAD.value)
            return Rejection(RejectReason.OVERLOAD)
        rec = RequestRecord(
            id=self._next_id, kind=kind, subject=subject, sender=sender, enqueue_time=now
        )
        self._next_id += 1
        self.records[rec.id] = rec
        self.screenshot_queue.append(rec)
        self._transition(rec, RequestState.QUEUED, now)
        return rec

    # -- render / encode ----------------------------------------------------

    def _cache_lookup(self, kind: str, subject: str, now: float) -> CacheEntry | None:
        entry = self.cache.get((kind, subject))
        if entry is None:
            return None
        if entry.window_id != self.window_id(now):
            del self.cache[(kind, subject)]
            return None
        return entry

    def _render_one(self, now: float) -> bool:
        if not self.screenshot_queue:
            return False
        rec = self.screenshot_queue.popleft()
        cached = self._cache_lookup(rec.kind, rec.subject, now)
        if cached is not None:
            rec.cached = True
            item = PlayerItem(
                record_id=rec.id,
                frames=cached.item_template.frames,
                slots=cached.item_template.slots,
                duration_s=cached.item_template.duration_s,
                wav_path=cached.item_template.wav_path,
            )
            self.player_queue.append(item)
            self._transition(rec, RequestState.ENCODED, now)
            return True
        self._transition(rec, RequestState.RENDERING, now)
        try:
            sonic_file = self._render_file(rec, now)
        except (rd.NavigationTimeout, rd.CaptureFailed, rd.LlmUnavailable) as e:
            rec.fail_reason = type(e).__name__
            self._transition(rec, RequestState.FAILED, now, reason=rec.fail_reason)
            return True
        item = self._encode_item(rec, sonic_file)
        self.player_queue.append(item)
        self.cache[(rec.kind, rec.subject)] = CacheEntry(
            key=(rec.kind, rec.subject), item_template=item, window_id=self.window_id(now)
        )
        self._transition(rec, RequestState.ENCODED, now)
        return True

    def _render_file(self, rec: RequestRecord, now: float) -> SonicFile:
        if rec.kind == "url":
            if self.browser is None:
                raise rd.CaptureFailed("no browser endpoint configured")
            capture = rd.capture_page(rec.subject, self.browser, self.config.nav_timeout_s)
            strips = rd.compress_strips(
                capture.image,
                quality=self.config.strip_quality,
                strip_height=self.config.strip_height,
            )
            if not rec.pushed:
                for link in rd.select_push_links(capture.links, k=self.config.push_k):
                    self.push_queue.append((normalize_url(link.target_url), rec.id))
                    self._log(now, "push_enqueued", origin=rec.id, url=link.target_url)
            return pipeline.build_webpage_file(rec.id, capture, strips, created_at=int(now))
        payload = rd.render_llm(rec.subject, self.llm)
        return pipeline.build_llm_file(rec.id, rec.subject, payload, created_at=int(now))

    def _encode_item(self, rec: RequestRecord, sonic_file: SonicFile) -> PlayerItem:
        frames = pipeline.encode_frames(sonic_file)
        protected = [fec_protect(pipeline.pad_slot(b), self.config.fec) for b in frames]
        duration = pipeline.air_seconds_for_slots(len(protected), self.config.fec, self.config.profile)
        wav_path = None
        if self.config.write_wav_dir:
            from sonic import modem as modem_mod

            pcm = modem_mod.modulate(b"".join(protected), self.config.profile)
            wav_path = str(Path(self.config.write_wav_dir) / f"item_{rec.id:06d}.wav")
            modem_mod.write_wav(pcm, wav_path)
        return PlayerItem(
            record_id=rec.id, frames=frames, slots=protected, duration_s=duration, wav_path=wav_path
        )

    # -- scheduler ----------------------------------------------------

    def tick(self, now: float) -> list[dict]:
        """Advance the pipeline; returns the actions taken."""
        actions: list[dict] = []

        if self.playing is not None and now >= self.playing_until:
            rec = self.records.get(self.playing.record_id)
            if rec is not None:
                rec.play_end = self.playing_until
                self._transition(rec, RequestState.DONE, self.playing_until)
            actions.append({"action": "done", "id": self.playing.record_id})
            self.playing = None

        self._maybe_export_hub(now, actions)

        if self._render_one(now):
            actions.append({"action": "render_step"})

        if self.in_window(now) and self.playing is None:
            if self.player_queue:
                item = self.player_queue.popleft()
                rec = self.records.get(item.record_id)
                if rec is not None:
                    rec.play_start = now
                    self._transition(rec, RequestState.PLAYING, now)
                self.playing = item
                self.playing_until = now + item.duration_s
                if self.on_air:
                    self.on_air("item", item)
                actions.append({"action": "play", "id": item.record_id, "until": self.playing_until})
            elif self.push_queue:
                url, origin = self.push_queue.popleft()
                rec = RequestRecord(
                    id=self._next_id, kind="url", subject=url, sender="__system__",
                    enqueue_time=now, pushed=True,
                )
                self._next_id += 1
                self.records[rec.id] = rec
                self.screenshot_queue.appendleft(rec)  # render next, ahead of user work
                self._transition(rec, RequestState.QUEUED, now, origin=origin)
                actions.append({"action": "push_render", "id": rec.id, "url": url})
            elif now - self.last_keepalive >= self.config.keepalive_interval_s:
                self.last_keepalive = now
                self._log(now, "keepalive")
                if self.on_air:
                    self.on_air("keepalive", None)
                actions.append({"action": "keepalive"})
        return actions

    def _maybe_export_hub(self, now: float, actions: list) -> None:
        if not self.in_window(now):
            return
        wid = self.window_id(now)
        if self._hub_exported_for == wid:
            return
        self._hub_exported_for = wid
        top = self.popular_subjects(now, self.config.hub_size)
        if not top:
            return
        lines = [f"{i + 1}. [{kind}] {subject} ({count} requests)" for i, (subject, kind, count) in enumerate(top)]
        text = "Knowledge hub - popular this week:\n" + "\n".join(lines)
        rec = RequestRecord(
            id=self._next_id, kind="gpt", subject="__knowledge_hub__",
            sender="__system__", enqueue_time=now, pushed=True,
        )
        self._next_id += 1
        self.records[rec.id] = rec
        sonic_file = pipeline.build_llm_file(rec.id, "knowledge-hub", text.encode(), created_at=int(now))
        item = self._encode_item(rec, sonic_file)
        self.player_queue.appendleft(item)
        self._transition(rec, RequestState.ENCODED, now)
        actions.append({"action": "hub_export", "id": rec.id, "entries": len(top)})

    def popular_subjects(self, now: float, n: int) -> list[tuple[str, str, int]]:
        """Top-N subjects of the rolling week; ties break lexicographically."""
        cutoff = now - POPULARITY_WINDOW_DAYS * 86400
        with self._db_lock:
            rows = self._db.execute(
            "SELECT subject, kind, COUNT(*) AS c FROM requests"
            " WHERE enqueue_time >= ? AND pushed=0 AND subject != ''"
                " GROUP BY subject, kind ORDER BY c DESC, subject ASC LIMIT ?",
                (cutoff, n),
            ).fetchall()
        return [(r[0], r[1], r[2]) for r in rows]

    def status(self, now: float) -> dict:
        return {
            "now": now,
            "window_open": self.in_window(now),
            "playing": self.playing.record_id if self.playing else None,
            "playing_until": self.playing_until if self.playing else None,
            "depths": {
                "screenshot": len(self.screenshot_queue),
                "player": len(self.player_queue),
                "push": len(self.push_queue),
            },
            "requests_total": len(self.records),
        }


def create_app(server: SonicServer, clock=time.time):
    """HTTP uplink endpoint + status, mirroring the SMS path."""
    from fastapi import FastAPI

    app = FastAPI(title="sonic-server")

    @app.post("/uplink")
    def uplink(body: dict):
        result = server.submit_uplink(str(body["sender"]), str(body["body"]), clock())
        if isinstance(result, Rejection):
            return {"accepted": False, "reason": result.reason.value}
        return {"accepted": True, "request_id": result.id}

    @app.get("/status")
    def status():
        return server.status(clock())

    return app


class FileTailer:
    """Line-delimited uplink source: each appended line is
    "<sender> <type> <body>", standing in for the SMS dongle."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._pos = 0

    def poll(self) -> list[UplinkMessage]:
        if not self.path.exists():
            return []
        out = []
        with open(self.path, "r") as f:
            f.seek(self._pos)
            for line in f:
                if not line.endswith("\n"):
                    break  # partial write; retry next poll
                self._pos += len(line.encode())
                parts = line.strip().split(None, 1)
                if len(parts) == 2:
                    out.append(UplinkMessage(sender_id=parts[0], body=parts[1]))
        return out
