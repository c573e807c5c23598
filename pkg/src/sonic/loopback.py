"""In-process loopback: head-end server wired to a receiver through the
simulated frame-level channel.

Drives the full interaction loop without audio hardware: uplink bodies
go straight into the server, every on-air transmission passes through
the RSSI loss model, and survivors land in the client store.  Used by
the end-to-end tests, the demo scripts, and as the backend for the web
UI's local API when no radio exists.
"""

from __future__ import annotations

import time
from pathlib import Path

from sonic import channel as ch
from sonic import format as sf
from sonic import renderer as rd
from sonic.client import ClientStore, IngestPipeline, ReceivedItem
from sonic.server import Rejection, ServerConfig, SonicServer


def default_fixture_pages() -> dict[str, rd.FixturePage]:
    return {
        "https://example.org": rd.FixturePage(
            height=900,
            anchors=[
                ("https://example.org/headline", (15, 40, 340, 60)),
                ("https://example.org/second", (15, 160, 300, 40)),
                ("https://example.org/third", (15, 260, 250, 30)),
                ("https://example.org/footer", (15, 820, 120, 20)),
            ],
            seed=11,
        ),
        "https://example.org/headline": rd.FixturePage(height=700, seed=12),
        "https://example.org/second": rd.FixturePage(height=650, seed=13),
        "https://example.org/third": rd.FixturePage(height=600, seed=14),
        "https://news.example": rd.FixturePage(
            height=1100,
            anchors=[("https://news.example/story", (10, 30, 350, 80))],
            seed=15,
        ),
        "https://news.example/story": rd.FixturePage(height=800, seed=16),
    }


class LoopbackSystem:
    """Server + channel + client sharing one simulated clock."""

    def __init__(
        self,
        store_path: str | Path,
        rssi_dbm: float = -60.0,
        seed: int = 0,
        start_time: float | None = None,
        pages: dict[str, rd.FixturePage] | None = None,
        config: ServerConfig | None = None,
    ):
        # default start: inside the window so transmissions flow
        self.now = 22 * 3600.0 if start_time is None else start_time
        self.rssi_dbm = rssi_dbm
        self.seed = seed
        self._tx_count = 0
        browser = rd.FixtureBrowser(pages or default_fixture_pages())
        self.server = SonicServer(
            config=config or ServerConfig(hub_size=0),
            browser=browser,
            llm=rd.StubLlm(),
            on_air=self._on_air,
        )
        self.store = ClientStore(store_path)
        self.client = IngestPipeline(self.store, clock=lambda: self.now)
        self.received: list[ReceivedItem] = []

    def _on_air(self, kind: str, item) -> None:
        self._tx_count += 1
        cond = ch.ChannelConditions(rssi_dbm=self.rssi_dbm, seed=self.seed + self._tx_count)
        if kind == "keepalive":
            blobs = [sf.serialize_frame(sf.keepalive_frame())]
        else:
            blobs = item.frames
        survivors = ch.apply_frame_channel(blobs, cond)
        got = self.client.push_slots(survivors)
        if got is not None:
            self.received.append(got)

    def submit(self, body: str, sender: str = "ui") -> dict:
        result = self.server.submit_uplink(sender, body, self.now)
        if isinstance(result, Rejection):
            return {"accepted": False, "reason": result.reason.value}
        return {"accepted": True, "request_id": result.id}

    def run(self, seconds: float, step: float = 1.0) -> None:
        end = self.now + seconds
        while self.now < end:
            self.server.tick(self.now)
            self.now += step

    def run_until_idle(self, max_seconds: float = 36_000.0, step: float = 5.0) -> None:
        """Advance until all queues drain and nothing is playing."""
        deadline = self.now + max_seconds
        while self.now < deadline:
            self.server.tick(self.now)
            s = self.server.status(self.now)
            if (
                s["playing"] is None
                and not any(s["depths"].values())
            ):
                return
            self.now += step

    def create_client_app(self, static_dir=None):
        from sonic.client import create_app

        return create_app(
            self.store,
            pipe=self.client,
            uplink=lambda body: self.submit(body),
            static_dir=static_dir,
        )
