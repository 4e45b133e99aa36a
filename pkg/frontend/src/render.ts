/** Render the form model to HTML strings. Pure functions of the model, so
 * the contract tests can assert markup without a DOM. */

import { checkLabel, type FormRow, type RecordingForm } from "./form.js";
import type { Violation } from "./types.js";
import { fileKind } from "./widgets.js";

export function escapeHtml(raw: string): string {
  return raw
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

function displayValue(value: unknown): string {
  if (value === null || value === undefined) return "";
  if (typeof value === "string") return value;
  return JSON.stringify(value);
}

function inputElement(form: RecordingForm, row: Extract<FormRow, { kind: "var" }>): string {
  const state = form.field(row.id);
  const value = escapeHtml(displayValue(state.value));
  const disabled = row.readOnly ? " disabled" : "";
  const common = `name="${escapeHtml(row.id)}"${disabled}`;
  switch (row.widget) {
    case "number-box":
      return `<input type="number" ${common} value="${value}">`;
    case "toggle":
      return `<input type="checkbox" ${common}${state.value === true ? " checked" : ""}>`;
    case "dropdown": {
      const options = (Array.isArray(row.entry.enum) ? row.entry.enum : [])
        .map((option) => {
          const text = escapeHtml(displayValue(option));
          const selected = option === state.value ? " selected" : "";
          return `<option value="${text}"${selected}>${text}</option>`;
        })
        .join("");
      return `<select ${common}><option value=""></option>${options}</select>`;
    }
    case "date-picker":
      return `<input type="date" ${common} value="${value}">`;
    case "datetime-picker":
      return `<input type="datetime-local" ${common} value="${value}">`;
    case "file-upload": {
      const kind = fileKind(row.entry);
      const accept = kind ? ` accept="${escapeHtml(kind)}/*"` : "";
      return `<input type="file" ${common}${accept}>`;
    }
    case "record-ref-picker":
      return `<input type="text" class="rf-record-ref" ${common} value="${value}">`;
    case "record-ref-multi-picker":
      return `<input type="text" class="rf-record-ref" data-multi="true" ${common} value="${value}">`;
    case "list-editor":
      return `<textarea class="rf-list" ${common}>${value}</textarea>`;
    case "table-editor": {
      const columns = Object.keys(row.entry.items?.properties ?? {});
      const header = columns.map((c) => `<th>${escapeHtml(c)}</th>`).join("");
      return `<table class="rf-table" data-field="${escapeHtml(row.id)}"><thead><tr>${header}</tr></thead><tbody></tbody></table>`;
    }
    default:
      return `<input type="text" ${common} value="${value}">`;
  }
}

export function renderRow(form: RecordingForm, row: FormRow): string {
  if (row.kind === "step") {
    const heading = `<h3 class="rf-step" data-step="${escapeHtml(row.id)}">Step ${escapeHtml(row.label)}</h3>`;
    if (!row.checkMode) return heading;
    const state = form.checkState(row.id);
    return (
      heading +
      `<button class="rf-check" data-check="${escapeHtml(row.id)}">${checkLabel(state)}</button>`
    );
  }
  if (row.kind === "check") {
    const state = form.checkState(row.id);
    return `<button class="rf-check" data-check="${escapeHtml(row.id)}">${checkLabel(state)}</button>`;
  }
  const state = form.field(row.id);
  const badge = state.autoFilled ? `<span class="rf-badge">auto-filled</span>` : "";
  const error = state.error ? `<span class="rf-error">${escapeHtml(state.error)}</span>` : "";
  return (
    `<label class="rf-field" data-field="${escapeHtml(row.id)}">` +
    `<span class="rf-title">${escapeHtml(row.title)}</span>` +
    inputElement(form, row) +
    badge +
    error +
    `</label>`
  );
}

export function renderViolations(violations: Violation[]): string {
  if (violations.length === 0) return "";
  const items = violations
    .map(
      (v) =>
        `<li data-field="${escapeHtml(v.field_id)}">${escapeHtml(v.message)}</li>`,
    )
    .join("");
  return `<ul class="rf-violations">${items}</ul>`;
}

export function renderForm(form: RecordingForm): string {
  const rows = form.rows.map((row) => renderRow(form, row)).join("\n");
  const submitted = form.record
    ? `<p class="rf-submitted">Recorded as ${escapeHtml(form.record.airalogy_record_id)}</p>`
    : "";
  return (
    `<form class="rf-form" data-session="${escapeHtml(form.session.session_id)}">\n` +
    `<h2>${escapeHtml(form.bundle.title)}</h2>\n` +
    rows +
    "\n" +
    renderViolations(form.violations) +
    submitted +
    `<button class="rf-submit" type="submit">Submit</button>\n</form>`
  );
}
