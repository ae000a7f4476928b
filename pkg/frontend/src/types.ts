/** DTO types of the client's loopback JSON API. */

export interface KeyRef {
  id: number;
  dbid: number;
}

export function keyText(key: KeyRef): string {
  return `${key.id}:${key.dbid}`;
}

export type FieldKind =
  | "text"
  | "number"
  | "decimal"
  | "flag"
  | "code"
  | "multicode"
  | "timestamp"
  | "crosslink";

export interface FieldDef {
  name: string;
  kind: FieldKind;
  mandatory: boolean;
  table?: string;
  target?: string;
  min?: number;
  max?: number;
  maxLen?: number;
}

export interface MaskDef {
  name: string;
  displayField: string | null;
  fields: FieldDef[];
  sections: { title: string; fields: string[] }[];
}

export interface BookInfo {
  bookId: string;
  bookName: string;
  schemaVersion: number;
  language: string;
  masks: MaskDef[];
}

export type FieldValue =
  | { kind: "text"; value: string }
  | { kind: "number"; value: number }
  | { kind: "decimal"; value: string }
  | { kind: "flag"; value: boolean }
  | { kind: "code"; table: string; id: number }
  | { kind: "multicode"; table: string; ids: number[] }
  | { kind: "timestamp"; ms: number }
  | { kind: "crosslink"; mask: string; id: number; dbid: number };

export type ValuesMap = Record<string, FieldValue>;

export interface EntryDto {
  key: KeyRef;
  mask: string;
  project: KeyRef;
  values: ValuesMap;
  version: number;
  status: string;
  deleted: boolean;
  modifiedAt: number;
}

export interface ListingRow {
  key: KeyRef;
  cells: string[];
  entry: EntryDto;
}

export interface Listing {
  mask: string;
  columns: string[];
  rows: ListingRow[];
}

export interface ProjectInfo {
  id: number;
  dbid: number;
  name: string;
  owner: number;
  entryCount: number;
  unsyncedCount: number;
  lastPulled: number;
  lastSyncAt: number | null;
}

export interface CodeTable {
  name: string;
  version: number;
  rows: Record<string, Record<string, string>>;
}

export type FieldState = "ok" | "mandatory_missing" | "invalid";

export interface ValidationResult {
  states: Record<string, FieldState>;
  saveable: boolean;
}

export interface SyncReport {
  pushed: number;
  pulled: number;
  conflicts: number;
  unsyncedCount: number;
}

export interface ConflictDto {
  key: KeyRef;
  mask: string;
  mine: EntryDto;
  theirs: EntryDto;
}

export type ResolveChoice = "KEEP_MINE" | "TAKE_THEIRS";

/** Display text of a code id in the requested language, first available
 * language as fallback, then the raw id marker. */
export function codeText(table: CodeTable, id: number, language: string): string {
  const texts = table.rows[String(id)];
  if (!texts) return `#${id}`;
  if (texts[language] !== undefined) return texts[language]!;
  const langs = Object.keys(texts).sort();
  return langs.length > 0 ? texts[langs[0]!]! : `#${id}`;
}
