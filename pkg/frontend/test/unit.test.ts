import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, ApiUnreachable } from "../src/api.js";
import { clearDraft, loadDraft, storeDraft } from "../src/draft.js";
import { codeText, keyText, type CodeTable } from "../src/types.js";

const species: CodeTable = {
  name: "species",
  version: 1,
  rows: { "1": { en: "Cattle", de: "Rind" }, "2": { de: "Schaf" } },
};

describe("codeText", () => {
  it("prefers the requested language", () => {
    expect(codeText(species, 1, "de")).toBe("Rind");
    expect(codeText(species, 1, "en")).toBe("Cattle");
  });

  it("falls back to the first available language", () => {
    expect(codeText(species, 2, "en")).toBe("Schaf");
  });

  it("falls back to the raw id marker", () => {
    expect(codeText(species, 99, "en")).toBe("#99");
  });
});

describe("keyText", () => {
  it("formats id:dbid", () => {
    expect(keyText({ id: 4, dbid: 7 })).toBe("4:7");
  });
});

describe("drafts", () => {
  it("stores, loads, and clears", () => {
    storeDraft("Find:1:1", { note: { kind: "text", value: "draft" } });
    expect(loadDraft("Find:1:1")).toEqual({ note: { kind: "text", value: "draft" } });
    clearDraft("Find:1:1");
    expect(loadDraft("Find:1:1")).toBeNull();
  });
});

function fakeFetch(status: number, body: unknown): typeof fetch {
  return async () =>
    new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });
}

describe("ApiClient", () => {
  it("returns parsed JSON on success", async () => {
    const api = new ApiClient("", fakeFetch(200, [{ name: "dig" }]));
    await expect(api.getProjects()).resolves.toEqual([{ name: "dig" }]);
  });

  it("maps error bodies to ApiError with status", async () => {
    const api = new ApiClient("", fakeFetch(404, { error: "no route" }));
    await expect(api.getProjects()).rejects.toMatchObject({
      status: 404,
      message: "no route",
    });
    await expect(api.getProjects()).rejects.toBeInstanceOf(ApiError);
  });

  it("maps network failures to ApiUnreachable", async () => {
    const api = new ApiClient("", async () => {
      throw new TypeError("fetch failed");
    });
    await expect(api.getProjects()).rejects.toBeInstanceOf(ApiUnreachable);
  });

  it("turns 422 saves into a states result", async () => {
    const api = new ApiClient(
      "",
      fakeFetch(422, { error: "validation failed", states: { count: "invalid" } }),
    );
    const result = await api.saveEntry({
      mask: "Find",
      project: { id: 1, dbid: 1 },
      values: {},
    });
    expect(result).toEqual({ ok: false, states: { count: "invalid" } });
  });
});
