import { describe, expect, it } from "vitest";

import type { SchemaEntry } from "../src/types.js";
import { fileKind, widgetKind } from "../src/widgets.js";

describe("widgetKind", () => {
  const cases: Array<[SchemaEntry, string]> = [
    [{ type: "string" }, "text-box"],
    [{ type: "integer" }, "number-box"],
    [{ type: "number", exclusiveMinimum: 0 }, "number-box"],
    [{ type: "boolean" }, "toggle"],
    [{ type: "string", enum: ["DMEM", "RPMI"] }, "dropdown"],
    [{ type: "string", format: "date" }, "date-picker"],
    [{ type: "string", format: "date-time" }, "datetime-picker"],
    [{ type: "string", format: "af-file:image" }, "file-upload"],
    [{ type: "string", format: "af-file:video" }, "file-upload"],
    [{ type: "string", format: "af-record-ref" }, "record-ref-picker"],
    [
      { type: "array", items: { type: "string", format: "af-record-ref" } },
      "record-ref-multi-picker",
    ],
    [{ type: "array", items: { type: "integer" } }, "list-editor"],
    [
      {
        type: "array",
        items: {
          type: "object",
          properties: { well: { type: "string" }, od: { type: "number" } },
          required: ["well", "od"],
        },
      },
      "table-editor",
    ],
  ];

  it.each(cases)("maps %j to %s", (entry, expected) => {
    expect(widgetKind(entry)).toBe(expected);
  });

  it("is total: unknown shapes fall back to a text box", () => {
    expect(widgetKind({})).toBe("text-box");
    expect(widgetKind({ type: "mystery" })).toBe("text-box");
    expect(widgetKind({ format: "af-future" })).toBe("text-box");
    expect(widgetKind({ type: "array" })).toBe("list-editor");
  });

  it("covers every property of a realistic emitted schema", () => {
    const properties: Record<string, SchemaEntry> = {
      name: { title: "Name", type: "string" },
      volume: { title: "Volume", type: "number", exclusiveMinimum: 0 },
      passage: { title: "Passage", type: "integer" },
      confirmed: { title: "Confirmed", type: "boolean" },
      medium: { title: "Medium", type: "string", enum: ["DMEM", "RPMI"] },
      seeded_on: { title: "Seeded On", type: "string", format: "date" },
      measured_at: { title: "Measured At", type: "string", format: "date-time" },
      photo: { title: "Photo", type: "string", format: "af-file:image" },
      parent: { title: "Parent", type: "string", format: "af-record-ref" },
      sources: { title: "Sources", type: "array", items: { type: "string", format: "af-record-ref" } },
      reads: { title: "Reads", type: "array", items: { type: "number" } },
      plate: {
        title: "Plate",
        type: "array",
        items: { type: "object", properties: { well: { type: "string" } }, required: ["well"] },
      },
    };
    for (const entry of Object.values(properties)) {
      expect(typeof widgetKind(entry)).toBe("string");
    }
  });
});

describe("fileKind", () => {
  it("extracts the accepted kind", () => {
    expect(fileKind({ type: "string", format: "af-file:image" })).toBe("image");
    expect(fileKind({ type: "string", format: "af-file:video" })).toBe("video");
    expect(fileKind({ type: "string" })).toBeNull();
  });
});
