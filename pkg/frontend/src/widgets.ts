/** Map one emitted schema entry to the widget that edits it. Total: every
 * entry the service can emit lands on a concrete widget, and anything
 * unrecognized falls back to a plain text box rather than failing. */

import type { SchemaEntry } from "./types.js";

export type WidgetKind =
  | "text-box"
  | "number-box"
  | "toggle"
  | "dropdown"
  | "date-picker"
  | "datetime-picker"
  | "file-upload"
  | "record-ref-picker"
  | "record-ref-multi-picker"
  | "list-editor"
  | "table-editor";

export function widgetKind(entry: SchemaEntry): WidgetKind {
  const format = typeof entry.format === "string" ? entry.format : "";
  if (format === "af-record-ref") return "record-ref-picker";
  if (format.startsWith("af-file:")) return "file-upload";
  if (format === "date") return "date-picker";
  if (format === "date-time") return "datetime-picker";
  if (Array.isArray(entry.enum)) return "dropdown";

  switch (entry.type) {
    case "boolean":
      return "toggle";
    case "integer":
    case "number":
      return "number-box";
    case "array": {
      const items = entry.items ?? {};
      if (items.format === "af-record-ref") return "record-ref-multi-picker";
      if (items.type === "object") return "table-editor";
      return "list-editor";
    }
    case "string":
      return "text-box";
    default:
      return "text-box";
  }
}

/** File widgets advertise what they accept ("image", "video", ...). */
export function fileKind(entry: SchemaEntry): string | null {
  const format = typeof entry.format === "string" ? entry.format : "";
  return format.startsWith("af-file:") ? format.slice("af-file:".length) : null;
}
