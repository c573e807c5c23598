// Scripted UI-loop test (the browser-level acceptance flow): submit a
// URL request, let the loopback "deliver" it, see it flip to ready to
// view, tap a click-map region, confirm, and observe the follow-up
// uplink request carrying the mapped target URL. Click mapping must
// resolve identically at two viewport widths.

// @vitest-environment happy-dom

import { beforeEach, describe, expect, it } from "vitest";

import { ClientApi } from "../src/api.js";
import { App } from "../src/app.js";
import { MockApiServer } from "./mockApi.js";

const PAGE_SUBJECT = "https://example.org";

function setup() {
  const server = new MockApiServer();
  const api = new ClientApi("", server.fetch);
  const root = document.createElement("div");
  document.body.appendChild(root);
  const app = new App(api, root, document);
  return { server, api, root, app };
}

function pageId(server: MockApiServer): number {
  const item = server.fix.items.find((i) => i.subject === PAGE_SUBJECT);
  if (!item) throw new Error("fixture page missing");
  return item.id;
}

describe("interaction loop", () => {
  beforeEach(() => {
    document.body.innerHTML = "";
  });

  it("submit -> ready to view -> tap -> confirm -> second uplink request", async () => {
    const { server, app, root } = setup();
    await app.refresh();

    // type the URL into the browser tab and submit
    const input = root.querySelector<HTMLInputElement>("#url-input")!;
    input.value = PAGE_SUBJECT;
    await app.submitFromInput("url", input);
    expect(server.uplinkLog).toEqual([`url ${PAGE_SUBJECT}`]);
    expect(root.querySelector("#browser-list")!.textContent).toContain("transmitting");

    // broadcast arrives; the row flips to ready to view
    server.deliverAll();
    await app.refresh();
    const row = Array.from(root.querySelectorAll("#browser-list li")).find((el) =>
      el.textContent!.includes(PAGE_SUBJECT),
    )!;
    expect(row.textContent).toContain("ready to view");

    // open the page and tap inside the first click-map box
    app.confirmImpl = () => true;
    const meta = await app.openItem(pageId(server));
    const box = meta.click_map[0];
    const viewer = app.currentViewer!;
    const target = await viewer.tapAt(box.x + 1, box.y + 1, 320);
    expect(target).toBe(box.url);
    expect(server.uplinkLog).toEqual([`url ${PAGE_SUBJECT}`, `url ${box.url}`]);
  });

  it("click mapping identical at two viewport widths", async () => {
    const { server, app } = setup();
    server.deliverAll();
    await app.refresh();
    app.confirmImpl = () => true;
    const meta = await app.openItem(pageId(server));
    const viewer = app.currentViewer!;
    for (const box of meta.click_map) {
      const at320 = await viewer.tapAt(box.x + 1, box.y + 1, 320);
      const at640 = await viewer.tapAt(2 * (box.x + 1), 2 * (box.y + 1), 640);
      expect(at320).toBe(box.url);
      expect(at640).toBe(at320);
    }
  });

  it("tap outside boxes is a no-op", async () => {
    const { server, app } = setup();
    server.deliverAll();
    await app.refresh();
    let confirmCalls = 0;
    app.confirmImpl = () => {
      confirmCalls += 1;
      return true;
    };
    await app.openItem(pageId(server));
    const before = server.uplinkLog.length;
    const target = await app.currentViewer!.tapAt(318, 1, 320);
    expect(target).toBeNull();
    expect(confirmCalls).toBe(0);
    expect(server.uplinkLog.length).toBe(before);
  });

  it("declining the confirm sends nothing", async () => {
    const { server, app } = setup();
    server.deliverAll();
    await app.refresh();
    app.confirmImpl = () => false;
    const meta = await app.openItem(pageId(server));
    const box = meta.click_map[0];
    const before = server.uplinkLog.length;
    const target = await app.currentViewer!.tapAt(box.x + 1, box.y + 1, 320);
    expect(target).toBeNull();
    expect(server.uplinkLog.length).toBe(before);
  });

  it("quota rejection shows a banner", async () => {
    const { server, app, root } = setup();
    await app.refresh();
    server.rejectNext = "quota";
    const input = root.querySelector<HTMLInputElement>("#url-input")!;
    input.value = "https://eleventh.example";
    await app.submitFromInput("url", input);
    expect(root.querySelector(".banner.error")!.textContent).toContain("quota");
  });

  it("submit button disabled on empty input", async () => {
    const { app, root } = setup();
    await app.refresh();
    const button = root.querySelector<HTMLButtonElement>("form.search button")!;
    expect(button.disabled).toBe(true);
    const input = root.querySelector<HTMLInputElement>("#url-input")!;
    input.value = "bbc.co.uk";
    input.dispatchEvent(new Event("input"));
    expect(button.disabled).toBe(false);
  });

  it("online badge mirrors the API", async () => {
    const { server, app, root } = setup();
    await app.refresh();
    expect(root.querySelector("#online-badge")!.className).toBe("online");
    server.online = false;
    await app.refresh();
    expect(root.querySelector("#online-badge")!.className).toBe("offline");
  });

  it("chat tab shows gpt answers and retransmit on failure", async () => {
    const { server, app, root } = setup();
    server.deliverAll();
    // mark the gpt item failed in a copied fixture
    const gpt = server.fix.items.find((i) => i.kind === "gpt")!;
    (gpt as { completion: string }).completion = "failed";
    await app.refresh();
    app.setTab("chat");
    const row = Array.from(root.querySelectorAll("#chat-list li")).find((el) =>
      el.textContent!.includes(gpt.subject),
    )!;
    const retry = row.querySelector<HTMLButtonElement>("button.retry")!;
    expect(retry.textContent).toContain("retransmit");
    retry.click();
    await new Promise((r) => setTimeout(r, 0));
    expect(server.uplinkLog).toContain(`gpt ${gpt.subject}`);
  });
});
