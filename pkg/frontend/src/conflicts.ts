/** Conflict resolution: each conflicted entry side by side, my values
 * against the server's, differing fields highlighted, with KEEP_MINE and
 * TAKE_THEIRS actions. A resolved entry leaves the list. */

import { ApiClient, ApiError } from "./api.js";
import type { ConflictDto, EntryDto, ResolveChoice } from "./types.js";
import { keyText } from "./types.js";

function valueText(entry: EntryDto, field: string): string {
  const value = entry.values[field];
  if (value === undefined) return "";
  switch (value.kind) {
    case "text":
    case "decimal":
      return String(value.value);
    case "number":
      return String(value.value);
    case "flag":
      return value.value ? "true" : "false";
    case "timestamp":
      return new Date(value.ms).toISOString();
    case "code":
      return `${value.table}#${value.id}`;
    case "multicode":
      return value.ids.map((id) => `${value.table}#${id}`).join("; ");
    case "crosslink":
      return `${value.mask} (${value.id}:${value.dbid})`;
  }
}

export class ConflictView {
  readonly element: HTMLElement;

  constructor(
    private readonly api: ApiClient,
    private readonly onResolved?: (entry: EntryDto) => void,
  ) {
    this.element = document.createElement("div");
    this.element.className = "conflict-view";
  }

  async refresh(): Promise<void> {
    const conflicts = await this.api.getConflicts();
    this.element.textContent = "";
    if (conflicts.length === 0) {
      const empty = document.createElement("p");
      empty.textContent = "no conflicts";
      this.element.appendChild(empty);
      return;
    }
    for (const conflict of conflicts) {
      this.element.appendChild(this.buildCard(conflict));
    }
  }

  private buildCard(conflict: ConflictDto): HTMLElement {
    const card = document.createElement("div");
    card.className = "conflict-card";
    card.dataset.key = keyText(conflict.key);

    const title = document.createElement("h3");
    title.textContent =
      `${conflict.mask} ${keyText(conflict.key)} — ` +
      `mine@${conflict.mine.version} vs server@${conflict.theirs.version}`;
    card.appendChild(title);

    const table = document.createElement("table");
    table.innerHTML =
      "<thead><tr><th>Field</th><th>Mine</th><th>Theirs</th></tr></thead>";
    const body = document.createElement("tbody");
    const fields = new Set([
      ...Object.keys(conflict.mine.values),
      ...Object.keys(conflict.theirs.values),
    ]);
    if (conflict.mine.deleted !== conflict.theirs.deleted) {
      fields.add("(deleted)");
    }
    for (const field of [...fields].sort()) {
      const row = document.createElement("tr");
      const mine =
        field === "(deleted)"
          ? String(conflict.mine.deleted)
          : valueText(conflict.mine, field);
      const theirs =
        field === "(deleted)"
          ? String(conflict.theirs.deleted)
          : valueText(conflict.theirs, field);
      if (mine !== theirs) row.className = "diff";
      row.insertCell().textContent = field;
      row.insertCell().textContent = mine;
      row.insertCell().textContent = theirs;
      body.appendChild(row);
    }
    table.appendChild(body);
    card.appendChild(table);

    const actions = document.createElement("div");
    for (const choice of ["KEEP_MINE", "TAKE_THEIRS"] as ResolveChoice[]) {
      const button = document.createElement("button");
      button.textContent = choice === "KEEP_MINE" ? "Keep mine" : "Take theirs";
      button.dataset.choice = choice;
      button.addEventListener("click", () => {
        void this.resolve(conflict, choice, card);
      });
      actions.appendChild(button);
    }
    card.appendChild(actions);
    return card;
  }

  private async resolve(
    conflict: ConflictDto,
    choice: ResolveChoice,
    card: HTMLElement,
  ): Promise<void> {
    try {
      const entry = await this.api.resolveConflict(conflict.key, choice);
      card.remove();
      this.onResolved?.(entry);
      if (!this.element.querySelector(".conflict-card")) {
        await this.refresh();
      }
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        await this.refresh(); // already resolved elsewhere: just re-read
      } else {
        throw err;
      }
    }
  }
}
