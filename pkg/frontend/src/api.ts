/** Typed access to the loopback control API. This is the UI's only way
 * of reading or writing data; there is no second path into the store. */

import type {
  BookInfo,
  CodeTable,
  ConflictDto,
  EntryDto,
  KeyRef,
  Listing,
  ProjectInfo,
  ResolveChoice,
  SyncReport,
  ValidationResult,
  ValuesMap,
} from "./types.js";
import { keyText } from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
    public readonly body: unknown = undefined,
  ) {
    super(message);
  }
}

/** The local API did not answer at all (client not running / offline). */
export class ApiUnreachable extends Error {}

export interface EntryDraft {
  mask: string;
  project: KeyRef;
  key?: KeyRef;
  values: ValuesMap;
}

export type SaveResult =
  | { ok: true; entry: EntryDto }
  | { ok: false; states: Record<string, string> };

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: typeof fetch = globalThis.fetch.bind(globalThis),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, {
        method,
        headers: body === undefined ? {} : { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiUnreachable(String(err));
    }
    let data: unknown = {};
    try {
      data = await response.json();
    } catch {
      // non-JSON body; leave data empty, status decides below
    }
    if (!response.ok) {
      const message =
        (data as { error?: string }).error ?? `HTTP ${response.status}`;
      throw new ApiError(response.status, message, data);
    }
    return data as T;
  }

  getBook(): Promise<BookInfo> {
    return this.request("GET", "/masks");
  }

  getProjects(): Promise<ProjectInfo[]> {
    return this.request("GET", "/projects");
  }

  getCodeTables(): Promise<CodeTable[]> {
    return this.request("GET", "/codetables");
  }

  getEntries(mask: string, project: KeyRef): Promise<Listing> {
    const query = `mask=${encodeURIComponent(mask)}&project=${keyText(project)}`;
    return this.request("GET", `/entries?${query}`);
  }

  validateDraft(draft: EntryDraft): Promise<ValidationResult> {
    return this.request("POST", "/entries", { ...draft, validateOnly: true });
  }

  async saveEntry(draft: EntryDraft): Promise<SaveResult> {
    try {
      const entry = await this.request<EntryDto>("POST", "/entries", draft);
      return { ok: true, entry };
    } catch (err) {
      if (err instanceof ApiError && err.status === 422) {
        // the save-time check found blockers the live validation missed
        const body = err.body as { states?: Record<string, string> };
        return { ok: false, states: body.states ?? {} };
      }
      throw err;
    }
  }

  deleteEntry(key: KeyRef): Promise<EntryDto> {
    return this.request("DELETE", `/entries?id=${key.id}&dbid=${key.dbid}`);
  }

  syncProject(project: KeyRef): Promise<SyncReport> {
    return this.request("POST", `/sync/${keyText(project)}`);
  }

  getConflicts(): Promise<ConflictDto[]> {
    return this.request("GET", "/conflicts");
  }

  resolveConflict(key: KeyRef, choice: ResolveChoice): Promise<EntryDto> {
    return this.request("POST", `/conflicts/${keyText(key)}/resolve`, { choice });
  }
}
