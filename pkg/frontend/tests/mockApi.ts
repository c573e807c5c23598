// Fetch-compatible mock of the receiver's local API, backed by a
// fixture generated by the real pipeline (scripts/gen_ui_fixture.py).
// Click resolution answers come from the fixture's precomputed table,
// so the mapping authority stays with the receiver implementation.

import fixture from "../fixtures/ui_fixture.json" with { type: "json" };
import { FetchLike } from "../src/api.js";

interface ClickExpectation {
  id: number;
  x: number;
  y: number;
  screen_width: number;
  target_url: string | null;
}

function jsonResponse(data: unknown, status = 200): Response {
  return new Response(JSON.stringify(data), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export class MockApiServer {
  delivered = new Set<number>();
  online = true;
  uplinkLog: string[] = [];
  rejectNext: string | null = null;
  uplinkDown = false;

  constructor(public fix = fixture) {}

  deliverAll(): void {
    for (const item of this.fix.items) this.delivered.add(item.id);
  }

  fetch: FetchLike = async (url: string, init?: RequestInit) => {
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(String(init.body)) : null;

    if (url === "/items") {
      return jsonResponse({
        items: this.fix.items.filter((it) => this.delivered.has(it.id)),
      });
    }
    const metaMatch = /^\/items\/(\d+)\/meta$/.exec(url);
    if (metaMatch) {
      const meta = (this.fix.metas as Record<string, unknown>)[metaMatch[1]];
      return meta ? jsonResponse(meta) : jsonResponse({ detail: "no such item" }, 404);
    }
    if (/^\/items\/\d+\/image$/.test(url)) {
      return new Response(new Uint8Array([137, 80, 78, 71]), { status: 200 });
    }
    if (url === "/click" && method === "POST") {
      const hit = (this.fix.clicks as ClickExpectation[]).find(
        (c) =>
          c.id === body.id &&
          c.screen_width === body.screen_width &&
          Math.abs(c.x - body.x) < 1e-6 &&
          Math.abs(c.y - body.y) < 1e-6,
      );
      if (!hit) throw new Error(`no fixture expectation for click ${JSON.stringify(body)}`);
      return jsonResponse({ target_url: hit.target_url });
    }
    if (url === "/request" && method === "POST") {
      if (this.uplinkDown) throw new Error("uplink unreachable");
      if (this.rejectNext) {
        const reason = this.rejectNext;
        this.rejectNext = null;
        return jsonResponse({ accepted: false, reason });
      }
      this.uplinkLog.push(body.body);
      return jsonResponse({ accepted: true, request_id: 100 + this.uplinkLog.length });
    }
    if (url === "/online") {
      return jsonResponse({ online: this.online });
    }
    return jsonResponse({ detail: "not found" }, 404);
  };
}
