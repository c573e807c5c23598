import { describe, expect, it } from "vitest";

import { parseHubIndex } from "../src/hub.js";

describe("parseHubIndex", () => {
  it("parses the broadcast index format", () => {
    const text =
      "Knowledge hub - popular this week:\n" +
      "1. [gpt] what is malaria (5 requests)\n" +
      "2. [url] https://news.example (3 requests)\n" +
      "3. [gpt] single (1 request)";
    const entries = parseHubIndex(text);
    expect(entries).toEqual([
      { rank: 1, kind: "gpt", subject: "what is malaria", count: 5 },
      { rank: 2, kind: "url", subject: "https://news.example", count: 3 },
      { rank: 3, kind: "gpt", subject: "single", count: 1 },
    ]);
  });

  it("ignores malformed lines", () => {
    expect(parseHubIndex("garbage\nmore garbage")).toEqual([]);
    expect(parseHubIndex("")).toEqual([]);
  });
});
