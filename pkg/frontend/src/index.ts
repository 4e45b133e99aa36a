export { ApiClient, ApiError, type FetchLike } from "./api.js";
export {
  RecordingForm,
  checkLabel,
  nextCheckState,
  type DraftSnapshot,
  type FieldState,
  type FormRow,
  type SubmitResult,
} from "./form.js";
export { escapeHtml, renderForm, renderRow, renderViolations } from "./render.js";
export { fileKind, widgetKind, type WidgetKind } from "./widgets.js";
export type * from "./types.js";
