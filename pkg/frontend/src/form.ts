/** Schema-driven input mask.
 *
 * One widget per field, picked by the field's kind: text and decimal
 * boxes, a number box, a checkbox, code dropdowns and multi-selects fed
 * from the code tables in the UI language, a timestamp picker, and a
 * cross-link picker listing the target mask's entries by their
 * representative text. Every change revalidates the draft against the
 * local API; a field in a mandatory or invalid state gets the matching
 * highlight, and either state blocks submission.
 *
 * If the local API stops answering, the form switches to a read-only
 * banner; the draft survives in browser storage, nothing is lost.
 */

import { ApiClient, ApiUnreachable, type EntryDraft } from "./api.js";
import { loadDraft, clearDraft, storeDraft } from "./draft.js";
import {
  codeText,
  keyText,
  type BookInfo,
  type CodeTable,
  type EntryDto,
  type FieldDef,
  type FieldState,
  type FieldValue,
  type KeyRef,
  type MaskDef,
  type ValuesMap,
} from "./types.js";

export interface FormContext {
  api: ApiClient;
  book: BookInfo;
  codeTables: CodeTable[];
  language: string;
  project: KeyRef;
  onSaved?: (entry: EntryDto) => void;
}

interface FieldWidget {
  field: FieldDef;
  wrapper: HTMLElement;
  read(): FieldValue | null;
  write(value: FieldValue | null): void;
}

export class MaskForm {
  readonly element: HTMLFormElement;
  private widgets = new Map<string, FieldWidget>();
  private submitButton: HTMLButtonElement;
  private banner: HTMLElement;
  private statusLine: HTMLElement;
  private editKey: KeyRef | null = null;
  private validateTimer: number | undefined;
  private pendingValidation: Promise<void> = Promise.resolve();

  constructor(
    private readonly mask: MaskDef,
    private readonly context: FormContext,
    entry?: EntryDto,
  ) {
    this.element = document.createElement("form");
    this.element.className = "mask-form";
    this.element.dataset.mask = mask.name;

    this.banner = document.createElement("div");
    this.banner.className = "offline-banner hidden";
    this.banner.textContent =
      "The local client is not reachable. The form is read-only; " +
      "your draft is kept in this browser.";
    this.element.appendChild(this.banner);

    this.buildFields();

    this.submitButton = document.createElement("button");
    this.submitButton.type = "submit";
    this.submitButton.textContent = "Save entry";
    this.submitButton.disabled = true;
    this.statusLine = document.createElement("div");
    this.statusLine.className = "form-status";
    const footer = document.createElement("div");
    footer.className = "form-footer";
    footer.append(this.submitButton, this.statusLine);
    this.element.appendChild(footer);

    this.element.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submit();
    });

    if (entry) {
      this.editKey = entry.key;
      this.writeValues(entry.values);
    } else {
      const draft = loadDraft(this.draftKey());
      if (draft) this.writeValues(draft);
    }
    void this.revalidate();
  }

  private draftKey(): string {
    return `${this.mask.name}:${keyText(this.context.project)}`;
  }

  // -- construction -----------------------------------------------------------

  private buildFields(): void {
    const inSection = new Set(
      this.mask.sections.flatMap((section) => section.fields),
    );
    const loose = this.mask.fields.filter((f) => !inSection.has(f.name));
    for (const field of loose) this.element.appendChild(this.buildRow(field));
    for (const section of this.mask.sections) {
      const fieldset = document.createElement("fieldset");
      const legend = document.createElement("legend");
      legend.textContent = section.title;
      fieldset.appendChild(legend);
      for (const name of section.fields) {
        const field = this.mask.fields.find((f) => f.name === name);
        if (field) fieldset.appendChild(this.buildRow(field));
      }
      this.element.appendChild(fieldset);
    }
  }

  private buildRow(field: FieldDef): HTMLElement {
    const wrapper = document.createElement("div");
    wrapper.className = "field state-ok";
    wrapper.dataset.field = field.name;

    const label = document.createElement("label");
    label.textContent = field.mandatory ? `${field.name} *` : field.name;
    wrapper.appendChild(label);

    const widget = this.buildWidget(field, wrapper);
    this.widgets.set(field.name, widget);

    const state = document.createElement("span");
    state.className = "state-text";
    wrapper.appendChild(state);
    return wrapper;
  }

  private buildWidget(field: FieldDef, wrapper: HTMLElement): FieldWidget {
    const onChange = () => this.scheduleValidation();
    switch (field.kind) {
      case "text":
      case "decimal": {
        const input = document.createElement("input");
        input.type = "text";
        if (field.maxLen) input.maxLength = field.maxLen;
        input.addEventListener("input", onChange);
        wrapper.appendChild(input);
        return {
          field,
          wrapper,
          read: () =>
            input.value === ""
              ? null
              : field.kind === "text"
                ? { kind: "text", value: input.value }
                : { kind: "decimal", value: input.value },
          write: (value) => {
            input.value =
              value && (value.kind === "text" || value.kind === "decimal")
                ? String(value.value)
                : "";
          },
        };
      }
      case "number": {
        const input = document.createElement("input");
        input.type = "number";
        if (field.min !== undefined) input.min = String(field.min);
        if (field.max !== undefined) input.max = String(field.max);
        input.addEventListener("input", onChange);
        wrapper.appendChild(input);
        return {
          field,
          wrapper,
          read: () =>
            input.value === ""
              ? null
              : { kind: "number", value: Number(input.value) },
          write: (value) => {
            input.value = value && value.kind === "number" ? String(value.value) : "";
          },
        };
      }
      case "flag": {
        const input = document.createElement("input");
        input.type = "checkbox";
        input.addEventListener("change", onChange);
        wrapper.appendChild(input);
        return {
          field,
          wrapper,
          read: () => ({ kind: "flag", value: input.checked }),
          write: (value) => {
            input.checked = value?.kind === "flag" ? value.value : false;
          },
        };
      }
      case "timestamp": {
        const input = document.createElement("input");
        input.type = "datetime-local";
        input.step = "1";
        input.addEventListener("input", onChange);
        wrapper.appendChild(input);
        return {
          field,
          wrapper,
          read: () => {
            if (input.value === "") return null;
            const ms = Date.parse(`${input.value}Z`); // entered times are UTC
            return Number.isNaN(ms) ? null : { kind: "timestamp", ms };
          },
          write: (value) => {
            input.value =
              value?.kind === "timestamp"
                ? new Date(value.ms).toISOString().slice(0, 19)
                : "";
          },
        };
      }
      case "code": {
        const select = document.createElement("select");
        select.appendChild(new Option("", ""));
        for (const [id, text] of this.codeOptions(field.table!)) {
          select.appendChild(new Option(text, String(id)));
        }
        select.addEventListener("change", onChange);
        wrapper.appendChild(select);
        return {
          field,
          wrapper,
          read: () =>
            select.value === ""
              ? null
              : { kind: "code", table: field.table!, id: Number(select.value) },
          write: (value) => {
            select.value = value?.kind === "code" ? String(value.id) : "";
          },
        };
      }
      case "multicode": {
        const select = document.createElement("select");
        select.multiple = true;
        for (const [id, text] of this.codeOptions(field.table!)) {
          select.appendChild(new Option(text, String(id)));
        }
        select.addEventListener("change", onChange);
        wrapper.appendChild(select);
        return {
          field,
          wrapper,
          read: () => {
            const ids = [...select.selectedOptions].map((o) => Number(o.value));
            return ids.length === 0
              ? null
              : { kind: "multicode", table: field.table!, ids };
          },
          write: (value) => {
            const chosen = new Set(
              value?.kind === "multicode" ? value.ids.map(String) : [],
            );
            for (const option of select.options) {
              option.selected = chosen.has(option.value);
            }
          },
        };
      }
      case "crosslink": {
        const select = document.createElement("select");
        select.appendChild(new Option("", ""));
        select.addEventListener("change", onChange);
        wrapper.appendChild(select);
        void this.fillCrosslinkOptions(field, select);
        return {
          field,
          wrapper,
          read: () => {
            if (select.value === "") return null;
            const [id, dbid] = select.value.split(":").map(Number);
            return { kind: "crosslink", mask: field.target!, id: id!, dbid: dbid! };
          },
          write: (value) => {
            select.value =
              value?.kind === "crosslink" ? `${value.id}:${value.dbid}` : "";
          },
        };
      }
    }
  }

  private codeOptions(table: string): [number, string][] {
    const found = this.context.codeTables.find((t) => t.name === table);
    if (!found) return [];
    return Object.keys(found.rows)
      .map(Number)
      .sort((a, b) => a - b)
      .map((id) => [id, codeText(found, id, this.context.language)]);
  }

  /** Target-mask entries, shown by their representative text plus key. */
  private async fillCrosslinkOptions(
    field: FieldDef,
    select: HTMLSelectElement,
  ): Promise<void> {
    const target = this.context.book.masks.find((m) => m.name === field.target);
    try {
      const listing = await this.context.api.getEntries(
        field.target!,
        this.context.project,
      );
      const column = target?.displayField
        ? listing.columns.indexOf(target.displayField)
        : -1;
      const current = select.value;
      for (const row of listing.rows) {
        const text =
          column >= 0 ? `${row.cells[column]} (${keyText(row.key)})` : keyText(row.key);
        select.appendChild(new Option(text, keyText(row.key)));
      }
      select.value = current;
    } catch (err) {
      if (err instanceof ApiUnreachable) this.goReadOnly();
      else throw err;
    }
  }

  // -- draft state ------------------------------------------------------------

  values(): ValuesMap {
    const out: ValuesMap = {};
    for (const [name, widget] of this.widgets) {
      const value = widget.read();
      if (value !== null) out[name] = value;
    }
    return out;
  }

  private writeValues(values: ValuesMap): void {
    for (const [name, widget] of this.widgets) {
      widget.write(values[name] ?? null);
    }
  }

  private draft(): EntryDraft {
    return {
      mask: this.mask.name,
      project: this.context.project,
      ...(this.editKey ? { key: this.editKey } : {}),
      values: this.values(),
    };
  }

  // -- validation and submission ---------------------------------------------

  private scheduleValidation(): void {
    storeDraft(this.draftKey(), this.values());
    if (this.validateTimer !== undefined) clearTimeout(this.validateTimer);
    this.validateTimer = setTimeout(() => {
      void this.revalidate();
    }, 150) as unknown as number;
  }

  /** Resolves when the latest scheduled validation has been applied. */
  settled(): Promise<void> {
    return this.pendingValidation;
  }

  revalidate(): Promise<void> {
    const run = async () => {
      try {
        const result = await this.context.api.validateDraft(this.draft());
        this.applyStates(result.states);
        this.submitButton.disabled = !result.saveable;
        this.banner.classList.add("hidden");
      } catch (err) {
        if (err instanceof ApiUnreachable) this.goReadOnly();
        else throw err;
      }
    };
    this.pendingValidation = this.pendingValidation.then(run, run);
    return this.pendingValidation;
  }

  private applyStates(states: Record<string, FieldState | string>): void {
    for (const [name, widget] of this.widgets) {
      const state = (states[name] ?? "ok") as FieldState;
      widget.wrapper.classList.remove(
        "state-ok",
        "state-mandatory",
        "state-invalid",
      );
      widget.wrapper.classList.add(
        state === "ok"
          ? "state-ok"
          : state === "mandatory_missing"
            ? "state-mandatory"
            : "state-invalid",
      );
      const text = widget.wrapper.querySelector(".state-text")!;
      text.textContent =
        state === "mandatory_missing"
          ? "required"
          : state === "invalid"
            ? "invalid"
            : "";
    }
  }

  private async submit(): Promise<void> {
    if (this.submitButton.disabled) return;
    try {
      const result = await this.context.api.saveEntry(this.draft());
      if (!result.ok) {
        this.applyStates(result.states);
        this.submitButton.disabled = true;
        return;
      }
      clearDraft(this.draftKey());
      this.statusLine.textContent = `saved ${keyText(result.entry.key)}`;
      if (!this.editKey) {
        this.writeValues({});
        void this.revalidate();
      }
      this.context.onSaved?.(result.entry);
    } catch (err) {
      if (err instanceof ApiUnreachable) this.goReadOnly();
      else throw err;
    }
  }

  private goReadOnly(): void {
    this.banner.classList.remove("hidden");
    this.submitButton.disabled = true;
    for (const widget of this.widgets.values()) {
      const input = widget.wrapper.querySelector("input, select");
      if (input) (input as HTMLInputElement).disabled = true;
    }
  }
}
