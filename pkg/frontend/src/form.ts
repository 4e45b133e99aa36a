/** Live recording form over one server session.
 *
 * Single source of truth is the server: every edit round-trips as a PATCH
 * and the local state is overwritten with whatever comes back, including
 * violations and assigner-computed values. The client never inspects or
 * converts values itself. At most one PATCH per field is in flight; edits
 * to the same field queue behind it in order.
 */

import { ApiClient, ApiError } from "./api.js";
import type {
  CheckState,
  LayoutEntry,
  RecordDocument,
  SchemaBundle,
  SchemaEntry,
  SessionInfo,
  SetFieldResponse,
  TriggerEntry,
  Violation,
} from "./types.js";
import { widgetKind, type WidgetKind } from "./widgets.js";

export interface FieldState {
  value: unknown;
  error: string | null;
  autoFilled: boolean;
  pending: boolean;
}

export type FormRow =
  | { kind: "step"; id: string; level: number; label: string; checkMode: boolean }
  | { kind: "var"; id: string; title: string; widget: WidgetKind; entry: SchemaEntry; readOnly: boolean }
  | { kind: "check"; id: string };

export type SubmitResult =
  | { ok: true; record: RecordDocument; reportUrl: string }
  | { ok: false; violations: Violation[] };

export interface DraftSnapshot {
  session_id: string;
  airalogy_protocol_id: string;
  states: Record<string, unknown>;
  checks: Record<string, CheckState>;
}

export function checkLabel(state: CheckState): string {
  if (state === true) return "Check passed";
  if (state === false) return "Check failed";
  return "To be checked";
}

export function nextCheckState(state: CheckState): CheckState {
  if (state === null) return true;
  if (state === true) return false;
  return null;
}

export class RecordingForm {
  readonly rows: FormRow[] = [];
  readonly fields = new Map<string, FieldState>();
  readonly checks = new Map<string, CheckState>();
  violations: Violation[] = [];
  record: RecordDocument | null = null;

  private readonly checkKinds = new Map<string, "step" | "check">();
  private readonly editChains = new Map<string, Promise<unknown>>();
  private submitInFlight = false;
  private dirty = false;

  constructor(
    private readonly client: ApiClient,
    readonly bundle: SchemaBundle,
    readonly session: SessionInfo,
  ) {
    const properties = bundle.json_schema.properties ?? {};
    const assigned = new Set(bundle.assigned_fields);
    for (const entry of bundle.layout) {
      this.rows.push(this.buildRow(entry, properties, assigned));
    }
    for (const [fieldId, value] of Object.entries(session.states)) {
      this.fields.set(fieldId, {
        value,
        error: null,
        autoFilled: assigned.has(fieldId),
        pending: false,
      });
    }
  }

  static async open(client: ApiClient, identity: string, userId: string): Promise<RecordingForm> {
    const bundle = await client.getSchema(identity);
    const session = await client.openSession(bundle.airalogy_protocol_id, userId);
    return new RecordingForm(client, bundle, session);
  }

  private buildRow(
    entry: LayoutEntry,
    properties: Record<string, SchemaEntry>,
    assigned: Set<string>,
  ): FormRow {
    if (entry.kind === "step") {
      const checkMode = entry.check_mode === true;
      if (checkMode) {
        this.checks.set(entry.id, null);
        this.checkKinds.set(entry.id, "step");
      }
      return {
        kind: "step",
        id: entry.id,
        level: entry.level ?? 1,
        label: entry.label ?? "",
        checkMode,
      };
    }
    if (entry.kind === "check") {
      this.checks.set(entry.id, null);
      this.checkKinds.set(entry.id, "check");
      return { kind: "check", id: entry.id };
    }
    const schema = properties[entry.id] ?? {};
    if (!this.fields.has(entry.id)) {
      this.fields.set(entry.id, { value: null, error: null, autoFilled: false, pending: false });
    }
    return {
      kind: "var",
      id: entry.id,
      title: typeof schema.title === "string" ? schema.title : entry.id,
      widget: widgetKind(schema),
      entry: schema,
      readOnly: assigned.has(entry.id),
    };
  }

  field(fieldId: string): FieldState {
    const state = this.fields.get(fieldId);
    if (!state) throw new Error(`unknown field: ${fieldId}`);
    return state;
  }

  isReadOnly(fieldId: string): boolean {
    return this.bundle.assigned_fields.includes(fieldId);
  }

  /** Send one edit; edits to the same field are serialized in order. */
  editField(fieldId: string, raw: unknown): Promise<SetFieldResponse> {
    if (this.isReadOnly(fieldId)) {
      throw new Error(`${fieldId} is computed by the protocol and cannot be edited`);
    }
    this.field(fieldId); // unknown ids fail before anything is queued
    const previous = this.editChains.get(fieldId) ?? Promise.resolve();
    const turn = previous.then(
      () => this.sendEdit(fieldId, raw),
      () => this.sendEdit(fieldId, raw),
    );
    this.editChains.set(fieldId, turn);
    return turn;
  }

  private async sendEdit(fieldId: string, raw: unknown): Promise<SetFieldResponse> {
    const state = this.field(fieldId);
    state.pending = true;
    try {
      const response = await this.client.setField(this.session.session_id, fieldId, raw);
      if (response.outcome === "ok") {
        state.value = response.value;
        state.error = null;
        state.autoFilled = false;
        this.applyTriggered(response.triggered);
      } else {
        state.value = null; // the server drops the field on a violation
        state.error = response.message ?? "rejected";
      }
      this.dirty = true;
      return response;
    } finally {
      state.pending = false;
    }
  }

  private applyTriggered(triggered: TriggerEntry[]): void {
    for (const entry of triggered) {
      if (entry.status !== "ran" || !entry.assigned) continue;
      for (const [fieldId, value] of Object.entries(entry.assigned)) {
        const state = this.fields.get(fieldId);
        if (!state) continue;
        state.value = value;
        state.error = null;
        state.autoFilled = true;
      }
    }
  }

  async triggerAssigner(assignerId: string): Promise<void> {
    const response = await this.client.triggerAssigner(this.session.session_id, assignerId);
    this.applyTriggered(response.triggered);
    if (response.success) this.dirty = true;
  }

  checkState(id: string): CheckState {
    const state = this.checks.get(id);
    return state === undefined ? null : state;
  }

  /** One click advances the three-state cycle; the server stores it. */
  async toggleCheck(id: string): Promise<CheckState> {
    const kind = this.checkKinds.get(id);
    if (!kind) throw new Error(`unknown check: ${id}`);
    const next = nextCheckState(this.checkState(id));
    const response = await this.client.annotate(this.session.session_id, kind, id, {
      checked: next,
    });
    this.checks.set(id, response.checked);
    this.dirty = true;
    return response.checked;
  }

  /** Submit once; re-entrant clicks while in flight are dropped. */
  async submit(userId?: string): Promise<SubmitResult | null> {
    if (this.submitInFlight) return null;
    this.submitInFlight = true;
    try {
      const body: Record<string, unknown> = {};
      if (userId !== undefined) body["user_id"] = userId;
      const record = await this.client.submit(this.session.session_id, body);
      this.record = record;
      this.violations = [];
      return { ok: true, record, reportUrl: this.client.reportUrl(record.airalogy_record_id) };
    } catch (error) {
      if (error instanceof ApiError && error.status === 400) {
        const detail = error.detail as { violations?: Violation[] };
        this.violations = detail.violations ?? [];
        return { ok: false, violations: this.violations };
      }
      throw error;
    } finally {
      this.submitInFlight = false;
    }
  }

  snapshot(): DraftSnapshot {
    const states: Record<string, unknown> = {};
    for (const [fieldId, state] of this.fields) {
      if (state.value !== null && state.value !== undefined) states[fieldId] = state.value;
    }
    const checks: Record<string, CheckState> = {};
    for (const [id, state] of this.checks) checks[id] = state;
    return {
      session_id: this.session.session_id,
      airalogy_protocol_id: this.session.airalogy_protocol_id,
      states,
      checks,
    };
  }

  /** Persist a snapshot every interval while there are unsaved changes. */
  enableAutosave(save: (draft: DraftSnapshot) => void, intervalMs = 10_000): () => void {
    const timer = setInterval(() => {
      if (!this.dirty) return;
      this.dirty = false;
      save(this.snapshot());
    }, intervalMs);
    return () => clearInterval(timer);
  }
}
