/** Wire types for the recording service. The client treats every payload as
 * server truth; nothing here is validated or recomputed locally. */

export interface SchemaEntry {
  type?: string;
  format?: string;
  enum?: unknown[];
  items?: SchemaEntry;
  properties?: Record<string, SchemaEntry>;
  required?: string[];
  title?: string;
  default?: unknown;
  [key: string]: unknown;
}

export interface JsonSchema {
  title?: string;
  type?: string;
  properties?: Record<string, SchemaEntry>;
  required?: string[];
}

export interface LayoutEntry {
  kind: "var" | "step" | "check";
  id: string;
  level?: number;
  label?: string;
  check_mode?: boolean;
}

export interface SchemaBundle {
  airalogy_protocol_id: string;
  title: string;
  json_schema: JsonSchema;
  layout: LayoutEntry[];
  assigned_fields: string[];
}

export interface SessionInfo {
  session_id: string;
  airalogy_protocol_id: string;
  states: Record<string, unknown>;
}

export interface TriggerEntry {
  assigner_id: string;
  status: "ran" | "failed" | "eligible_manual";
  assigned?: Record<string, unknown>;
  error_message?: string;
}

export interface SetFieldResponse {
  outcome: "ok" | "violation";
  field_id: string;
  value: unknown;
  triggered: TriggerEntry[];
  message?: string;
  rule?: string;
}

export interface TriggerResponse {
  success: boolean;
  assigned_fields: Record<string, unknown>;
  error_message: string;
  triggered: TriggerEntry[];
  states: Record<string, unknown>;
}

export interface AnnotationResponse {
  id: string;
  annotation: string | null;
  checked: boolean | null;
}

export interface Violation {
  field_id: string;
  rule: string;
  message: string;
}

export interface RecordDocument {
  airalogy_record_id: string;
  record_id: string;
  record_version: number;
  metadata: Record<string, unknown>;
  data: Record<string, unknown>;
}

export type CheckState = boolean | null;
