// Knowledge-hub index parsing: the head-end broadcasts a plain-text
// "popular this week" list as an LLM_TEXT item; entries become
// openable (if stored locally) or requestable rows.

export interface HubEntry {
  rank: number;
  kind: "url" | "gpt";
  subject: string;
  count: number;
}

const LINE = /^(\d+)\.\s+\[(url|gpt)\]\s+(.+?)\s+\((\d+) requests?\)\s*$/;

export function parseHubIndex(text: string): HubEntry[] {
  const out: HubEntry[] = [];
  for (const line of text.split("\n")) {
    const m = LINE.exec(line.trim());
    if (!m) continue;
    out.push({
      rank: parseInt(m[1], 10),
      kind: m[2] as "url" | "gpt",
      subject: m[3],
      count: parseInt(m[4], 10),
    });
  }
  return out;
}

export const HUB_SUBJECT = "knowledge-hub";
