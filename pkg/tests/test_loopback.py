"""Full interaction loop over the in-process loopback: request a page,
receive it through the lossy channel, resolve a click-map tap, and
observe the follow-up uplink request."""

import pytest

from sonic.client import Completion, classify_completion
from sonic.loopback import LoopbackSystem
from sonic.server import RequestState


@pytest.fixture()
def loop(tmp_path):
    return LoopbackSystem(store_path=tmp_path / "client.db", rssi_dbm=-60.0, seed=3)


class TestInteractionLoop:
    def test_request_receive_click_request(self, loop):
        ack = loop.submit("url https://example.org", sender="user1")
        assert ack["accepted"]
        loop.run_until_idle(max_seconds=1200, step=2.0)
        assert loop.received
        item = next(i for i in loop.received if i.metadata.source == "https://example.org")
        assert classify_completion(item) in (Completion.COMPLETE, Completion.PARTIAL_VIEWABLE)

        app = loop.create_client_app()
        from fastapi.testclient import TestClient as HttpClient

        http = HttpClient(app)
        listed = http.get("/items").json()["items"]
        assert any(i["subject"] == "https://example.org" for i in listed)

        meta = http.get(f"/items/{item.request_id}/meta").json()
        box = meta["click_map"][0]
        # identical click resolution at two viewport widths
        hit_320 = http.post(
            "/click",
            json={"id": item.request_id, "x": box["x"] + 2, "y": box["y"] + 2, "screen_width": 320},
        ).json()["target_url"]
        hit_640 = http.post(
            "/click",
            json={
                "id": item.request_id,
                "x": 2 * (box["x"] + 2),
                "y": 2 * (box["y"] + 2),
                "screen_width": 640,
            },
        ).json()["target_url"]
        assert hit_320 == hit_640 == box["url"]

        # the tap becomes a second uplink request
        before = len(loop.server.records)
        ack2 = http.post("/request", json={"body": f"url {hit_320}"}).json()
        assert ack2["accepted"]
        assert len(loop.server.records) == before + 1

    def test_keepalive_sets_online(self, loop):
        loop.run(seconds=12.0, step=1.0)  # idle window -> keepalives
        assert loop.client.online
        app = loop.create_client_app()
        from fastapi.testclient import TestClient as HttpClient

        assert HttpClient(app).get("/online").json()["online"] is True

    def test_lossy_channel_still_delivers(self, tmp_path):
        loop = LoopbackSystem(store_path=tmp_path / "c2.db", rssi_dbm=-86.0, seed=11)
        loop.submit("url https://example.org")
        loop.run_until_idle(max_seconds=1200, step=2.0)
        pages = [i for i in loop.received if i.kind == "url"]
        assert pages
        assert any(classify_completion(i) != Completion.FAILED for i in pages)

    def test_gpt_flow(self, loop):
        loop.submit("gpt what is malaria", sender="user2")
        loop.run_until_idle(max_seconds=600, step=2.0)
        answers = [i for i in loop.received if i.kind == "gpt"]
        assert len(answers) == 1
        assert answers[0].text.startswith("Q: what is malaria")
        rec = loop.server.records[answers[0].request_id]
        assert rec.state == RequestState.DONE
