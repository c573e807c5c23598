import { describe, expect, it } from "vitest";

import { ClientApi } from "../src/api.js";
import { AppState } from "../src/state.js";
import { MockApiServer } from "./mockApi.js";

function setup() {
  const server = new MockApiServer();
  const state = new AppState(new ClientApi("", server.fetch));
  return { server, state };
}

describe("AppState", () => {
  it("optimistic entry appears as requested, then resolves to ready", async () => {
    const { server, state } = setup();
    await state.refresh();
    expect(await state.submit("url", "https://example.org")).toBe(true);
    let view = state.view();
    expect(view.some((i) => i.subject === "https://example.org" && i.state !== "ready")).toBe(
      true,
    );
    server.deliverAll();
    await state.refresh();
    view = state.view();
    const item = view.find((i) => i.subject === "https://example.org");
    expect(item?.state).toBe("ready");
    // the optimistic duplicate is gone
    expect(view.filter((i) => i.subject === "https://example.org").length).toBe(1);
  });

  it("empty input is not submitted", async () => {
    const { server, state } = setup();
    expect(await state.submit("url", "   ")).toBe(false);
    expect(server.uplinkLog).toEqual([]);
  });

  it("quota rejection surfaces verbatim", async () => {
    const { server, state } = setup();
    server.rejectNext = "quota";
    expect(await state.submit("gpt", "one more question")).toBe(false);
    expect(state.quotaNotice).toBe("quota");
  });

  it("uplink down queues locally with pending badge", async () => {
    const { server, state } = setup();
    server.uplinkDown = true;
    expect(await state.submit("url", "https://offline.example")).toBe(true);
    const entry = state.view().find((i) => i.subject === "https://offline.example");
    expect(entry?.pendingUplink).toBe(true);
    expect(entry?.state).toBe("requested");
  });

  it("ready strictly follows receiver completion", async () => {
    const { server, state } = setup();
    server.deliverAll();
    await state.refresh();
    for (const item of state.view()) {
      const raw = server.fix.items.find((i) => i.id === item.id);
      if (!raw) continue;
      expect(item.state).toBe(raw.completion === "failed" ? "failed" : "ready");
    }
  });

  it("transmitting only while online", async () => {
    const { server, state } = setup();
    await state.refresh();
    await state.submit("url", "https://pending.example");
    expect(state.view().find((i) => i.subject === "https://pending.example")?.state).toBe(
      "transmitting",
    );
    server.online = false;
    await state.refresh();
    expect(state.view().find((i) => i.subject === "https://pending.example")?.state).toBe(
      "requested",
    );
  });
});
