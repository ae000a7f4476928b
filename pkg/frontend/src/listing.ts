/** Listing view: the resolved table of one mask, tombstones excluded,
 * cells already human-readable from the local API. */

import { ApiClient } from "./api.js";
import type { KeyRef, Listing } from "./types.js";
import { keyText } from "./types.js";

export class ListingView {
  readonly element: HTMLElement;

  constructor(
    private readonly api: ApiClient,
    private readonly onDeleted?: () => void,
  ) {
    this.element = document.createElement("div");
    this.element.className = "listing";
  }

  async refresh(mask: string, project: KeyRef): Promise<void> {
    const listing = await this.api.getEntries(mask, project);
    this.element.textContent = "";
    this.element.appendChild(this.buildTable(listing));
  }

  private buildTable(listing: Listing): HTMLTableElement {
    const table = document.createElement("table");
    table.dataset.mask = listing.mask;
    const head = table.createTHead().insertRow();
    for (const column of listing.columns) {
      const th = document.createElement("th");
      th.textContent = column;
      head.appendChild(th);
    }
    head.appendChild(document.createElement("th")); // actions
    const body = table.createTBody();
    for (const row of listing.rows) {
      const tr = body.insertRow();
      tr.dataset.key = keyText(row.key);
      for (const cell of row.cells) {
        tr.insertCell().textContent = cell;
      }
      const actions = tr.insertCell();
      const remove = document.createElement("button");
      remove.textContent = "Delete";
      remove.addEventListener("click", () => {
        void this.api.deleteEntry(row.key).then(() => {
          tr.remove();
          this.onDeleted?.();
        });
      });
      actions.appendChild(remove);
    }
    return table;
  }
}
