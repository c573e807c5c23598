// App state: the polled item list merged with optimistic pending
// requests. Item state is derived purely from API responses; the UI
// keeps no authority of its own.

import { ClientApi, ItemSummary } from "./api.js";

export type UiState = "requested" | "transmitting" | "ready" | "failed";

export interface UiItem {
  id: number | null; // null while only requested locally
  kind: "url" | "gpt";
  subject: string;
  state: UiState;
  loss_percent: number;
  received_at: number | null;
  pendingUplink?: boolean; // queued locally because the uplink was down
}

interface PendingRequest {
  kind: "url" | "gpt";
  subject: string;
  at: number;
  pendingUplink: boolean;
}

function summaryState(it: ItemSummary): UiState {
  // "ready to view" strictly follows the receiver's classification
  return it.completion === "failed" ? "failed" : "ready";
}

export class AppState {
  items: ItemSummary[] = [];
  pending: PendingRequest[] = [];
  online = false;
  quotaNotice: string | null = null;

  constructor(private api: ClientApi) {}

  async refresh(): Promise<void> {
    this.items = await this.api.items();
    try {
      this.online = await this.api.online();
    } catch {
      this.online = false;
    }
    // drop pending entries once the broadcast delivered them
    this.pending = this.pending.filter(
      (p) => !this.items.some((it) => it.subject === p.subject && it.kind === p.kind),
    );
  }

  async submit(kind: "url" | "gpt", text: string): Promise<boolean> {
    const trimmed = text.trim();
    if (!trimmed) return false;
    this.quotaNotice = null;
    const body = `${kind} ${trimmed}`;
    let pendingUplink = false;
    try {
      const ack = await this.api.request(body);
      if (!ack.accepted) {
        // surface quota and other rejections verbatim
        this.quotaNotice = ack.reason ?? "rejected";
        return false;
      }
    } catch {
      pendingUplink = true; // uplink unreachable: queue locally
    }
    this.pending.push({ kind, subject: trimmed, at: Date.now(), pendingUplink });
    return true;
  }

  /** Merged view for the list panes, newest first. */
  view(): UiItem[] {
    const out: UiItem[] = this.items.map((it) => ({
      id: it.id,
      kind: it.kind,
      subject: it.subject,
      state: summaryState(it),
      loss_percent: it.loss_percent,
      received_at: it.received_at,
    }));
    for (const p of this.pending) {
      out.push({
        id: null,
        kind: p.kind,
        subject: p.subject,
        state: this.online && !p.pendingUplink ? "transmitting" : "requested",
        loss_percent: 0,
        received_at: null,
        pendingUplink: p.pendingUplink,
      });
    }
    out.sort((a, b) => (b.received_at ?? Infinity) - (a.received_at ?? Infinity));
    return out;
  }
}
