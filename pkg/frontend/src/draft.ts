/** Draft persistence: unsaved form values survive reloads and API
 * outages in browser storage, keyed by mask and project. */

import type { ValuesMap } from "./types.js";

const PREFIX = "xbook-draft:";

export function storeDraft(key: string, values: ValuesMap): void {
  try {
    localStorage.setItem(PREFIX + key, JSON.stringify(values));
  } catch {
    // storage full or unavailable: drafts are a convenience, not a contract
  }
}

export function loadDraft(key: string): ValuesMap | null {
  const raw = localStorage.getItem(PREFIX + key);
  if (raw === null) return null;
  try {
    return JSON.parse(raw) as ValuesMap;
  } catch {
    return null;
  }
}

export function clearDraft(key: string): void {
  localStorage.removeItem(PREFIX + key);
}

export function clearAllDrafts(): void {
  const doomed: string[] = [];
  for (let i = 0; i < localStorage.length; i++) {
    const key = localStorage.key(i);
    if (key?.startsWith(PREFIX)) doomed.push(key);
  }
  doomed.forEach((key) => localStorage.removeItem(key));
}
