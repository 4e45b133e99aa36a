/** In-memory stand-in for the recording service, faithful to its wire
 * contract: integer coercion, descendant resets, an auto assigner over
 * (a, b) -> total, a cross-field rule at submit, and session freezing.
 */

import type { FetchLike } from "../src/api.js";
import type { SchemaBundle, TriggerEntry, Violation } from "../src/types.js";

export const PROTOCOL_ID =
  "airalogy.id.lab.demo_lab.project.demo_project.protocol.mix_check.v.1.0.0";

export const BUNDLE: SchemaBundle = {
  airalogy_protocol_id: PROTOCOL_ID,
  title: "Mixing with a sum limit",
  json_schema: {
    title: "VarModel",
    type: "object",
    properties: {
      a: { title: "A", type: "integer" },
      b: { title: "B", type: "integer" },
      total: { title: "Total", type: "number" },
    },
    required: ["a", "b"],
  },
  layout: [
    { kind: "step", id: "prepare", level: 1, label: "1", check_mode: false },
    { kind: "var", id: "a" },
    { kind: "var", id: "b" },
    { kind: "var", id: "total" },
    { kind: "check", id: "check_done" },
  ],
  assigned_fields: ["total"],
};

interface LogEntry {
  method: string;
  path: string;
  body: unknown;
}

interface Hooks {
  beforeRespond?: (path: string) => Promise<void>;
}

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

function coerceInteger(fieldId: string, raw: unknown): { ok: true; value: number } | { ok: false; message: string } {
  if (typeof raw === "number" && Number.isInteger(raw)) return { ok: true, value: raw };
  if (typeof raw === "string" && /^-?\d+$/.test(raw.trim())) {
    return { ok: true, value: parseInt(raw.trim(), 10) };
  }
  return { ok: false, message: `${fieldId}: expected integer, got ${typeof raw}` };
}

export class MockServer {
  states: Record<string, unknown> = {};
  checks: Record<string, boolean | null> = { check_done: null };
  frozen = false;
  sessionId = "session-1";
  submitCount = 0;
  log: LogEntry[] = [];
  maxConcurrentPerField = new Map<string, number>();
  private activePerField = new Map<string, number>();

  constructor(private readonly hooks: Hooks = {}) {}

  fetch: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    this.log.push({ method, path, body });

    if (method === "GET" && path.endsWith("/schema")) return json(200, BUNDLE);
    if (method === "POST" && path === "/sessions") {
      return json(200, {
        session_id: this.sessionId,
        airalogy_protocol_id: PROTOCOL_ID,
        states: { ...this.states },
      });
    }
    if (method === "PATCH" && path === `/sessions/${this.sessionId}/fields`) {
      return this.setField(body as { field_id: string; value: unknown }, path);
    }
    if (method === "PATCH" && path === `/sessions/${this.sessionId}/annotations`) {
      return this.annotate(body as { kind: string; id: string; checked?: boolean | null });
    }
    if (method === "POST" && path === `/sessions/${this.sessionId}/submit`) {
      return this.submit(path);
    }
    return json(404, { detail: `no route: ${method} ${path}` });
  };

  private async gate(path: string, fieldId: string): Promise<void> {
    const active = (this.activePerField.get(fieldId) ?? 0) + 1;
    this.activePerField.set(fieldId, active);
    const max = this.maxConcurrentPerField.get(fieldId) ?? 0;
    if (active > max) this.maxConcurrentPerField.set(fieldId, active);
    if (this.hooks.beforeRespond) await this.hooks.beforeRespond(path);
  }

  private release(fieldId: string): void {
    this.activePerField.set(fieldId, (this.activePerField.get(fieldId) ?? 1) - 1);
  }

  private async setField(
    payload: { field_id: string; value: unknown },
    path: string,
  ): Promise<Response> {
    const fieldId = payload.field_id;
    if (!["a", "b", "total"].includes(fieldId)) {
      return json(404, { detail: `unknown field: ${fieldId}` });
    }
    await this.gate(path, fieldId);
    try {
      if (this.frozen) return json(409, { detail: "session is frozen" });
      if (payload.value === null) {
        delete this.states[fieldId];
        delete this.states["total"];
        return json(200, { outcome: "ok", field_id: fieldId, value: null, triggered: [] });
      }
      const coerced = coerceInteger(fieldId, payload.value);
      if (!coerced.ok) {
        delete this.states[fieldId];
        delete this.states["total"];
        return json(200, {
          outcome: "violation",
          field_id: fieldId,
          value: null,
          triggered: [],
          message: coerced.message,
          rule: "type",
        });
      }
      delete this.states["total"]; // descendants reset before re-propagation
      this.states[fieldId] = coerced.value;
      const triggered: TriggerEntry[] = [];
      if (typeof this.states["a"] === "number" && typeof this.states["b"] === "number") {
        const total = (this.states["a"] as number) + (this.states["b"] as number);
        this.states["total"] = total;
        triggered.push({ assigner_id: "sum", status: "ran", assigned: { total } });
      }
      return json(200, {
        outcome: "ok",
        field_id: fieldId,
        value: coerced.value,
        triggered,
      });
    } finally {
      this.release(fieldId);
    }
  }

  private annotate(payload: { kind: string; id: string; checked?: boolean | null }): Response {
    if (payload.id !== "check_done" || payload.kind !== "check") {
      return json(404, { detail: `unknown ${payload.kind}: ${payload.id}` });
    }
    if ("checked" in payload) this.checks[payload.id] = payload.checked ?? null;
    return json(200, { id: payload.id, annotation: null, checked: this.checks[payload.id] });
  }

  private async submit(path: string): Promise<Response> {
    await this.gate(path, "__submit__");
    try {
      this.submitCount += 1;
      if (this.frozen) return json(409, { detail: "session is frozen" });
      const violations: Violation[] = [];
      for (const required of ["a", "b"]) {
        if (!(required in this.states)) {
          violations.push({ field_id: required, rule: "required", message: `missing: ${required}` });
        }
      }
      const a = this.states["a"];
      const b = this.states["b"];
      if (typeof a === "number" && typeof b === "number" && !(a + b < 10)) {
        violations.push({
          field_id: "sum_below_ten",
          rule: "sum_below_ten",
          message: "a + b must less than 10",
        });
      }
      if (this.checks["check_done"] === null) {
        violations.push({
          field_id: "check_done",
          rule: "check",
          message: "unreviewed check: check_done",
        });
      }
      if (violations.length > 0) return json(400, { detail: { violations } });
      this.frozen = true;
      return json(200, {
        airalogy_record_id: "airalogy.id.record.11111111-2222-3333-4444-555555555555.v.1",
        record_id: "11111111-2222-3333-4444-555555555555",
        record_version: 1,
        metadata: { sha1: "0".repeat(40) },
        data: { var: { ...this.states }, step: {}, check: { check_done: { checked: true } } },
      });
    } finally {
      this.release("__submit__");
    }
  }

  callsTo(fragment: string): LogEntry[] {
    return this.log.filter((entry) => entry.path.includes(fragment));
  }
}

export function deferred(): { promise: Promise<void>; resolve: () => void } {
  let resolve!: () => void;
  const promise = new Promise<void>((r) => {
    resolve = r;
  });
  return { promise, resolve };
}
