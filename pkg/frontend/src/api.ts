/** Thin client for the inference service HTTP contract. */
import type { ApiError, PredictionResponse } from "./types.js";

/** Same-origin by default; override at deploy time via
 * `globalThis.TEALEAF_API_BASE = "http://host:8000"`. */
export function apiBase(): string {
  return (globalThis as { TEALEAF_API_BASE?: string }).TEALEAF_API_BASE ?? "";
}

export type FetchLike = typeof fetch;

export async function fetchClasses(fetchFn: FetchLike = fetch):
    Promise<string[]> {
  const resp = await fetchFn(`${apiBase()}/api/v1/classes`);
  if (!resp.ok) {
    throw new Error(`classes endpoint returned ${resp.status}`);
  }
  return (await resp.json()) as string[];
}

export async function postPredict(file: File, fetchFn: FetchLike = fetch):
    Promise<PredictionResponse> {
  const form = new FormData();
  form.append("image", file, file.name);
  const resp = await fetchFn(`${apiBase()}/api/v1/predict?explain=true`, {
    method: "POST",
    body: form,
  });
  if (!resp.ok) {
    let message = `request failed with status ${resp.status}`;
    try {
      const body = (await resp.json()) as ApiError;
      if (body.message) message = body.message;
    } catch {
      // non-JSON error body; keep the status message
    }
    throw new Error(message);
  }
  return (await resp.json()) as PredictionResponse;
}
