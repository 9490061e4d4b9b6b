/**
 * UI state machine. Five phases:
 *
 *   idle -> preview -> submitting -> result
 *     \       |            \-> error (preview preserved for retry)
 *      \-> error (rejected file)
 *
 * Reset returns to idle from every phase. Transitions are pure; the app
 * shell owns side effects (object URLs, network).
 */
import type { PredictionResponse } from "./types.js";

export type Phase = "idle" | "preview" | "submitting" | "result" | "error";

export interface UiState {
  phase: Phase;
  selectedFile: File | null;
  previewUrl: string | null;
  response: PredictionResponse | null;
  errorMessage: string | null;
}

export const idleState: UiState = {
  phase: "idle",
  selectedFile: null,
  previewUrl: null,
  response: null,
  errorMessage: null,
};

export function fileAccepted(state: UiState, file: File,
                             previewUrl: string): UiState {
  return { ...idleState, phase: "preview", selectedFile: file, previewUrl };
}

export function fileRejected(state: UiState, reason: string): UiState {
  // a rejected file never replaces an existing preview
  return { ...state, phase: "error", errorMessage: reason, response: null };
}

export function beginSubmit(state: UiState): UiState {
  if (state.phase !== "preview" && state.phase !== "error") {
    return state;
  }
  if (!state.selectedFile) {
    return state;
  }
  return { ...state, phase: "submitting", errorMessage: null, response: null };
}

export function submitSucceeded(state: UiState,
                                response: PredictionResponse): UiState {
  return { ...state, phase: "result", response, errorMessage: null };
}

export function submitFailed(state: UiState, message: string): UiState {
  // keep the file and preview so the user can retry
  return { ...state, phase: "error", errorMessage: message, response: null };
}

export function reset(_state: UiState): UiState {
  return idleState;
}

/** Phase invariants, checked by tests and cheap enough to assert live. */
export function isConsistent(state: UiState): boolean {
  if (state.phase === "result" && !state.response) return false;
  if (state.phase === "error" && !state.errorMessage) return false;
  if (state.phase === "preview" && !state.selectedFile) return false;
  if (state.phase === "submitting" && !state.selectedFile) return false;
  return true;
}
