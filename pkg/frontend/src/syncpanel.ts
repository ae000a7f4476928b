/** Sync panel: one row per project with entry counts, the unsynchronized
 * count, and a per-project Synchronize action. Triggering it shows a
 * RUNNING state, then the report (pushed / pulled / conflicts); conflicts
 * link to the resolution view. A failing sync marks only its own row. */

import { ApiClient } from "./api.js";
import type { ProjectInfo, SyncReport } from "./types.js";

export type RowState = "IDLE" | "RUNNING" | "ERROR";

export class SyncPanel {
  readonly element: HTMLElement;
  private body: HTMLTableSectionElement;

  constructor(
    private readonly api: ApiClient,
    private readonly onConflicts?: () => void,
  ) {
    this.element = document.createElement("div");
    this.element.className = "sync-panel";
    const table = document.createElement("table");
    table.innerHTML =
      "<thead><tr><th>Project</th><th>Owner</th><th>Entries</th>" +
      "<th>Not synchronized</th><th>Last sync</th><th>State</th><th></th></tr></thead>";
    this.body = document.createElement("tbody");
    table.appendChild(this.body);
    this.element.appendChild(table);
  }

  async refresh(): Promise<void> {
    const projects = await this.api.getProjects();
    this.body.textContent = "";
    for (const project of projects) {
      this.body.appendChild(this.buildRow(project));
    }
    if (projects.length === 0) {
      const row = this.body.insertRow();
      const cell = row.insertCell();
      cell.colSpan = 7;
      cell.textContent = "no projects known yet; log in from the client first";
    }
  }

  private buildRow(project: ProjectInfo): HTMLTableRowElement {
    const row = document.createElement("tr");
    row.dataset.project = `${project.id}:${project.dbid}`;
    row.insertCell().textContent = project.name;
    row.insertCell().textContent = String(project.owner);
    row.insertCell().textContent = String(project.entryCount);
    const unsynced = row.insertCell();
    unsynced.className = "unsynced-count";
    unsynced.textContent = String(project.unsyncedCount);
    row.insertCell().textContent = project.lastSyncAt
      ? new Date(project.lastSyncAt).toISOString()
      : "never";
    const state = row.insertCell();
    state.className = "row-state";
    state.textContent = "IDLE";
    const actions = row.insertCell();
    const button = document.createElement("button");
    button.textContent = "Synchronize";
    button.addEventListener("click", () => {
      void this.runSync(project, row, button);
    });
    actions.appendChild(button);
    return row;
  }

  private setState(row: HTMLTableRowElement, state: RowState, detail = ""): void {
    const cell = row.querySelector(".row-state")!;
    cell.textContent = detail ? `${state}: ${detail}` : state;
    row.dataset.state = state;
  }

  private async runSync(
    project: ProjectInfo,
    row: HTMLTableRowElement,
    button: HTMLButtonElement,
  ): Promise<void> {
    button.disabled = true;
    this.setState(row, "RUNNING");
    try {
      const report = await this.api.syncProject(project);
      this.showReport(row, report);
      row.querySelector(".unsynced-count")!.textContent =
        String(report.unsyncedCount);
      this.setState(row, "IDLE");
      await this.refresh(); // counts must match a direct query afterwards
    } catch (err) {
      this.setState(row, "ERROR", err instanceof Error ? err.message : String(err));
    } finally {
      button.disabled = false;
    }
  }

  private showReport(row: HTMLTableRowElement, report: SyncReport): void {
    const line = document.createElement("div");
    line.className = "sync-report";
    line.textContent =
      `${row.dataset.project}: pushed=${report.pushed} ` +
      `pulled=${report.pulled} conflicts=${report.conflicts}`;
    if (report.conflicts > 0) {
      const link = document.createElement("a");
      link.href = "#/conflicts";
      link.className = "conflict-badge";
      link.textContent = `${report.conflicts} conflict(s) to resolve`;
      link.addEventListener("click", () => this.onConflicts?.());
      line.append(" ", link);
    }
    this.element.appendChild(line);
  }
}
