// Typed client for the receiver daemon's local HTTP API. The UI never
// touches modem or server internals; everything goes through these
// endpoints.

export interface ItemSummary {
  id: number;
  kind: "url" | "gpt";
  subject: string;
  loss_percent: number;
  complete: boolean;
  completion: "complete" | "partial_viewable" | "failed";
  received_at: number;
}

export interface ClickBox {
  x: number;
  y: number;
  w: number;
  h: number;
  url: string;
}

export interface ItemMeta {
  id: number;
  kind: "url" | "gpt";
  subject: string;
  loss_percent: number;
  completion: "complete" | "partial_viewable" | "failed";
  image_width: number;
  image_height: number;
  click_map: ClickBox[];
  text: string | null;
}

export interface UplinkAck {
  accepted: boolean;
  reason?: string;
  request_id?: number;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ClientApi {
  constructor(
    private base: string = "",
    private fetchImpl: FetchLike = (...a) => fetch(...a),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(this.base + path);
    if (!resp.ok) throw new Error(`${path}: HTTP ${resp.status}`);
    return (await resp.json()) as T;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const resp = await this.fetchImpl(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) throw new Error(`${path}: HTTP ${resp.status}`);
    return (await resp.json()) as T;
  }

  async items(): Promise<ItemSummary[]> {
    const data = await this.getJson<{ items: ItemSummary[] }>("/items");
    return data.items;
  }

  itemMeta(id: number): Promise<ItemMeta> {
    return this.getJson<ItemMeta>(`/items/${id}/meta`);
  }

  imageUrl(id: number): string {
    return `${this.base}/items/${id}/image`;
  }

  async click(
    id: number,
    x: number,
    y: number,
    screenWidth: number,
  ): Promise<string | null> {
    const data = await this.postJson<{ target_url: string | null }>("/click", {
      id,
      x,
      y,
      screen_width: screenWidth,
    });
    return data.target_url;
  }

  request(body: string): Promise<UplinkAck> {
    return this.postJson<UplinkAck>("/request", { body });
  }

  async online(): Promise<boolean> {
    const data = await this.getJson<{ online: boolean }>("/online");
    return data.online;
  }
}
