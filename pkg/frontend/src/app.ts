/** Application shell: the fixed navigation (Projects, Data Entry,
 * Listing, Tools, Help, Log-out) over hash routes, one view container
 * per entry. The UI language follows the client's configured language
 * (reported by the local API), falling back to the browser language. */

import { ApiClient, ApiUnreachable } from "./api.js";
import { ConflictView } from "./conflicts.js";
import { clearAllDrafts } from "./draft.js";
import { MaskForm } from "./form.js";
import { ListingView } from "./listing.js";
import { SyncPanel } from "./syncpanel.js";
import type { BookInfo, CodeTable, KeyRef, ProjectInfo } from "./types.js";

const NAV_ENTRIES = [
  ["#/projects", "Projects"],
  ["#/entry", "Data Entry"],
  ["#/listing", "Listing"],
  ["#/tools", "Tools"],
  ["#/help", "Help"],
  ["#/logout", "Log-out"],
] as const;

export class App {
  private api: ApiClient;
  private book!: BookInfo;
  private codeTables: CodeTable[] = [];
  private projects: ProjectInfo[] = [];
  private language = "en";
  private main!: HTMLElement;

  constructor(private readonly root: HTMLElement, api?: ApiClient) {
    this.api = api ?? new ApiClient("");
  }

  async start(): Promise<void> {
    try {
      this.book = await this.api.getBook();
      this.codeTables = await this.api.getCodeTables();
      this.projects = await this.api.getProjects();
    } catch (err) {
      if (err instanceof ApiUnreachable) {
        this.root.innerHTML =
          '<div class="offline-banner">The local client is not running. ' +
          "Start it with: xbook serve-ui</div>";
        return;
      }
      throw err;
    }
    this.language = this.book.language || navigator.language.slice(0, 2) || "en";
    this.buildShell();
    window.addEventListener("hashchange", () => {
      void this.route();
    });
    await this.route();
  }

  private buildShell(): void {
    this.root.textContent = "";
    const header = document.createElement("header");
    const title = document.createElement("h1");
    title.textContent = this.book.bookName;
    header.appendChild(title);
    const nav = document.createElement("nav");
    for (const [href, label] of NAV_ENTRIES) {
      const link = document.createElement("a");
      link.href = href;
      link.textContent = label;
      nav.appendChild(link);
    }
    header.appendChild(nav);
    this.main = document.createElement("main");
    this.root.append(header, this.main);
  }

  private selectedProject(): KeyRef | null {
    const fromHash = /project=(\d+):(\d+)/.exec(location.hash);
    if (fromHash) {
      return { id: Number(fromHash[1]), dbid: Number(fromHash[2]) };
    }
    const first = this.projects[0];
    return first ? { id: first.id, dbid: first.dbid } : null;
  }

  private async route(): Promise<void> {
    const hash = location.hash || "#/projects";
    this.main.textContent = "";
    for (const link of this.root.querySelectorAll("nav a")) {
      link.classList.toggle(
        "active",
        hash.startsWith((link as HTMLAnchorElement).hash.split("?")[0]!),
      );
    }
    if (hash.startsWith("#/projects")) return this.showProjects();
    if (hash.startsWith("#/entry")) return this.showEntry();
    if (hash.startsWith("#/listing")) return this.showListing();
    if (hash.startsWith("#/conflicts")) return this.showConflicts();
    if (hash.startsWith("#/tools")) return this.showTools();
    if (hash.startsWith("#/help")) return this.showHelp();
    if (hash.startsWith("#/logout")) return this.showLogout();
    return this.showProjects();
  }

  private async showProjects(): Promise<void> {
    const panel = new SyncPanel(this.api, () => {
      location.hash = "#/conflicts";
    });
    this.main.appendChild(panel.element);
    await panel.refresh();
  }

  private maskPicker(onChange: (mask: string) => void): HTMLSelectElement {
    const select = document.createElement("select");
    select.className = "mask-picker";
    for (const mask of this.book.masks) {
      select.appendChild(new Option(mask.name, mask.name));
    }
    select.addEventListener("change", () => onChange(select.value));
    return select;
  }

  private async showEntry(): Promise<void> {
    const project = this.selectedProject();
    if (!project) {
      this.main.textContent = "no project available; synchronize first";
      return;
    }
    const picker = this.maskPicker(() => render());
    this.main.appendChild(picker);
    const slot = document.createElement("div");
    this.main.appendChild(slot);
    const listing = new ListingView(this.api);
    const render = () => {
      const mask = this.book.masks.find((m) => m.name === picker.value)!;
      slot.textContent = "";
      const form = new MaskForm(mask, {
        api: this.api,
        book: this.book,
        codeTables: this.codeTables,
        language: this.language,
        project,
        onSaved: () => void listing.refresh(mask.name, project),
      });
      slot.appendChild(form.element);
      slot.appendChild(listing.element);
      void listing.refresh(mask.name, project);
    };
    render();
  }

  private async showListing(): Promise<void> {
    const project = this.selectedProject();
    if (!project) {
      this.main.textContent = "no project available; synchronize first";
      return;
    }
    const listing = new ListingView(this.api);
    const picker = this.maskPicker((mask) => void listing.refresh(mask, project));
    this.main.append(picker, listing.element);
    await listing.refresh(picker.value, project);
  }

  private async showConflicts(): Promise<void> {
    const view = new ConflictView(this.api);
    this.main.appendChild(view.element);
    await view.refresh();
  }

  private async showTools(): Promise<void> {
    const tools = document.createElement("div");
    tools.innerHTML =
      "<h2>Tools</h2>" +
      "<p>CSV export runs in the client: <code>xbook export --project " +
      "&lt;id:dbid&gt; --out &lt;dir&gt;</code> writes one file per mask.</p>" +
      "<h3>Code tables</h3>";
    for (const table of this.codeTables) {
      const caption = document.createElement("h4");
      caption.textContent = `${table.name} (version ${table.version})`;
      tools.appendChild(caption);
      const list = document.createElement("ul");
      for (const id of Object.keys(table.rows).sort((a, b) => +a - +b)) {
        const item = document.createElement("li");
        const texts = table.rows[id]!;
        item.textContent = `${id}: ${texts[this.language] ?? Object.values(texts)[0] ?? ""}`;
        list.appendChild(item);
      }
      tools.appendChild(list);
    }
    this.main.appendChild(tools);
  }

  private async showHelp(): Promise<void> {
    this.main.innerHTML =
      "<h2>Help</h2>" +
      "<p>Mandatory fields are marked yellow until filled; invalid input " +
      "is marked red. An entry can only be saved when every field is " +
      "acceptable.</p>" +
      "<p>Your edits are stored locally and work offline. Use the " +
      "Projects panel to synchronize with the server; conflicting edits " +
      "are shown side by side for you to resolve.</p>";
  }

  private async showLogout(): Promise<void> {
    clearAllDrafts();
    this.main.innerHTML =
      "<h2>Log-out</h2><p>Local drafts cleared. Sessions are managed by " +
      "the client: run <code>xbook login</code> to start a new one.</p>";
  }
}

export function mount(root: HTMLElement, api?: ApiClient): App {
  const app = new App(root, api);
  void app.start();
  return app;
}
