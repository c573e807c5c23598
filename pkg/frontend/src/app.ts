// Three-tab shell (Browser / Chat / Knowledge Hub) over the receiver's
// local API: a 2 s polling loop keeps the lists fresh, the online
// badge mirrors /online, and every mutation goes through the API.

import { ClientApi, ItemMeta } from "./api.js";
import { HUB_SUBJECT, parseHubIndex } from "./hub.js";
import { AppState, UiItem } from "./state.js";
import { PageViewer } from "./viewer.js";

export type Tab = "browser" | "chat" | "hub";

export class App {
  readonly state: AppState;
  tab: Tab = "browser";
  private root: HTMLElement;
  private doc: Document;
  private timer: ReturnType<typeof setInterval> | null = null;
  confirmImpl?: (message: string) => boolean;

  constructor(
    private api: ClientApi,
    root: HTMLElement,
    doc: Document = document,
  ) {
    this.state = new AppState(api);
    this.root = root;
    this.doc = doc;
  }

  start(pollMs = 2000): void {
    void this.refresh();
    this.timer = setInterval(() => void this.refresh(), pollMs);
  }

  stop(): void {
    if (this.timer !== null) clearInterval(this.timer);
  }

  async refresh(): Promise<void> {
    try {
      await this.state.refresh();
    } catch {
      this.state.online = false;
    }
    this.render();
  }

  async submitFromInput(kind: "url" | "gpt", input: HTMLInputElement): Promise<void> {
    if (await this.state.submit(kind, input.value)) input.value = "";
    this.render();
  }

  setTab(tab: Tab): void {
    this.tab = tab;
    this.render();
  }

  render(): void {
    const d = this.doc;
    this.root.textContent = "";

    const header = d.createElement("header");
    const title = d.createElement("h1");
    title.textContent = "Radio Web";
    const badge = d.createElement("span");
    badge.id = "online-badge";
    badge.className = this.state.online ? "online" : "offline";
    badge.textContent = this.state.online ? "server online" : "server offline";
    header.append(title, badge);

    const nav = d.createElement("nav");
    for (const tab of ["browser", "chat", "hub"] as Tab[]) {
      const btn = d.createElement("button");
      btn.dataset.tab = tab;
      btn.textContent = tab === "hub" ? "Knowledge Hub" : tab[0].toUpperCase() + tab.slice(1);
      if (tab === this.tab) btn.classList.add("active");
      btn.addEventListener("click", () => this.setTab(tab));
      nav.appendChild(btn);
    }

    const main = d.createElement("main");
    if (this.tab === "browser") this.renderBrowser(main);
    else if (this.tab === "chat") this.renderChat(main);
    else this.renderHub(main);

    this.root.append(header, nav, main);
  }

  private searchBar(main: HTMLElement, kind: "url" | "gpt", placeholder: string): void {
    const d = this.doc;
    const form = d.createElement("form");
    form.className = "search";
    const input = d.createElement("input");
    input.type = "text";
    input.placeholder = placeholder;
    input.id = `${kind}-input`;
    const btn = d.createElement("button");
    btn.type = "submit";
    btn.textContent = kind === "url" ? "Request" : "Ask";
    const maybeDisable = () => {
      btn.disabled = input.value.trim() === "";
    };
    maybeDisable();
    input.addEventListener("input", maybeDisable);
    form.addEventListener("submit", (e) => {
      e.preventDefault();
      void this.submitFromInput(kind, input);
    });
    form.append(input, btn);
    main.appendChild(form);
    if (this.state.quotaNotice) {
      const banner = d.createElement("div");
      banner.className = "banner error";
      banner.textContent = `request rejected: ${this.state.quotaNotice}`;
      main.appendChild(banner);
    }
  }

  private itemRow(item: UiItem): HTMLElement {
    const d = this.doc;
    const row = d.createElement("li");
    row.className = `item ${item.state}`;
    if (item.id !== null) row.dataset.itemId = String(item.id);
    const label = d.createElement("span");
    label.textContent = item.subject;
    const status = d.createElement("span");
    status.className = "status";
    status.textContent =
      item.state === "ready"
        ? "ready to view"
        : item.pendingUplink
          ? "pending uplink"
          : item.state;
    row.append(label, status);
    if (item.state === "ready" && item.id !== null) {
      row.classList.add("clickable");
      row.addEventListener("click", () => void this.openItem(item.id as number));
    }
    return row;
  }

  private renderBrowser(main: HTMLElement): void {
    this.searchBar(main, "url", "request a URL, e.g. bbc.co.uk");
    const list = this.doc.createElement("ul");
    list.id = "browser-list";
    for (const item of this.state.view().filter((i) => i.kind === "url")) {
      list.appendChild(this.itemRow(item));
    }
    main.appendChild(list);
  }

  private renderChat(main: HTMLElement): void {
    this.searchBar(main, "gpt", "ask a question");
    const list = this.doc.createElement("ul");
    list.id = "chat-list";
    const items = this.state
      .view()
      .filter((i) => i.kind === "gpt" && i.subject !== HUB_SUBJECT);
    for (const item of items) {
      const row = this.itemRow(item);
      if (item.state === "failed" && item.id !== null) {
        const retry = this.doc.createElement("button");
        retry.className = "retry";
        retry.textContent = "failed — retransmit?";
        retry.addEventListener("click", (e) => {
          e.stopPropagation();
          void this.state.submit("gpt", item.subject).then(() => this.render());
        });
        row.appendChild(retry);
      }
      list.appendChild(row);
    }
    main.appendChild(list);
  }

  private renderHub(main: HTMLElement): void {
    const d = this.doc;
    const list = d.createElement("ul");
    list.id = "hub-list";
    const hubItems = this.state.items.filter((i) => i.subject === HUB_SUBJECT);
    if (hubItems.length === 0) {
      const empty = d.createElement("p");
      empty.textContent = "No knowledge-hub index received yet.";
      main.appendChild(empty);
      return;
    }
    void this.api.itemMeta(hubItems[0].id).then((meta) => {
      for (const entry of parseHubIndex(meta.text ?? "")) {
        const row = d.createElement("li");
        row.className = "hub-entry";
        row.textContent = `${entry.subject} (${entry.count})`;
        const local = this.state.items.find(
          (i) => i.subject === entry.subject && i.completion !== "failed",
        );
        const btn = d.createElement("button");
        if (local) {
          btn.textContent = "open";
          btn.addEventListener("click", () => void this.openItem(local.id));
        } else {
          btn.textContent = "request";
          btn.addEventListener("click", () =>
            void this.state.submit(entry.kind, entry.subject).then(() => this.render()),
          );
        }
        row.appendChild(btn);
        list.appendChild(row);
      }
      main.appendChild(list);
    });
  }

  async openItem(id: number): Promise<ItemMeta> {
    const meta = await this.api.itemMeta(id);
    const d = this.doc;
    const overlay = d.createElement("div");
    overlay.className = "overlay";
    overlay.id = "item-view";
    const close = d.createElement("button");
    close.textContent = "back";
    close.addEventListener("click", () => overlay.remove());
    overlay.appendChild(close);
    if (meta.kind === "url") {
      const viewer = new PageViewer(
        this.api,
        meta,
        {
          onRequest: (body) => {
            const [kind, ...rest] = body.split(" ");
            void this.state.submit(kind as "url" | "gpt", rest.join(" ")).then(() => this.render());
          },
          confirm: this.confirmImpl,
        },
        d,
      );
      overlay.appendChild(viewer.root);
      this.currentViewer = viewer;
    } else {
      const pre = d.createElement("pre");
      pre.textContent = meta.text ?? "";
      overlay.appendChild(pre);
    }
    this.root.appendChild(overlay);
    return meta;
  }

  currentViewer: PageViewer | null = null;
}
