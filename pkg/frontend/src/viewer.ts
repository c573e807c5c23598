// Scrollable page viewer: the received raster rendered at device
// width, taps forwarded to the receiver's /click endpoint, confirmed
// targets resubmitted as new requests. All coordinate math beyond
// "where inside the displayed image" stays on the receiver side, so
// click resolution is identical at every viewport width.

import { ClientApi, ItemMeta } from "./api.js";

export interface ViewerCallbacks {
  onRequest: (body: string) => void;
  confirm?: (message: string) => boolean; // injectable for tests
}

export class PageViewer {
  readonly root: HTMLElement;
  private img: HTMLImageElement;

  constructor(
    private api: ClientApi,
    private meta: ItemMeta,
    private callbacks: ViewerCallbacks,
    doc: Document = document,
  ) {
    this.root = doc.createElement("div");
    this.root.className = "page-viewer";
    this.img = doc.createElement("img");
    this.img.src = api.imageUrl(meta.id);
    this.img.alt = meta.subject;
    this.img.draggable = false;
    this.root.appendChild(this.img);
    this.img.addEventListener("click", (e) => void this.handleTap(e as MouseEvent));
  }

  async handleTap(e: MouseEvent): Promise<void> {
    const rect = this.img.getBoundingClientRect();
    if (rect.width <= 0) return;
    const x = e.clientX - rect.left;
    const y = e.clientY - rect.top;
    await this.tapAt(x, y, rect.width);
  }

  /** Tap at displayed-image coordinates; exposed for tests. */
  async tapAt(x: number, y: number, screenWidth: number): Promise<string | null> {
    const target = await this.api.click(this.meta.id, x, y, screenWidth);
    if (target === null) return null; // NO_LINK taps are no-ops
    const ask = this.callbacks.confirm ?? ((m: string) => window.confirm(m));
    if (ask(`Request linked page?\n${target}`)) {
      this.callbacks.onRequest(`url ${target}`);
      return target;
    }
    return null;
  }
}
