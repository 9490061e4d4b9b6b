import type { PredictionResponse } from "../src/types.js";

export const CLASSES = [
  "Brown Blight", "Gray Blight", "Green mirid bug", "Healthy leaf",
  "Helopeltis", "Red spider", "Tea algal leaf spot",
];

// 1x1 black PNG
export const TINY_PNG_BASE64 =
  "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR42mNkYPhf" +
  "DwAChwGA60e6kgAAAABJRU5ErkJggg==";

export function predictionFixture(
    overrides: Partial<PredictionResponse> = {}): PredictionResponse {
  return {
    label: "Brown Blight",
    confidence: 0.97,
    probabilities: {
      "Brown Blight": 0.97,
      "Gray Blight": 0.012,
      "Green mirid bug": 0.006,
      "Healthy leaf": 0.004,
      "Helopeltis": 0.003,
      "Red spider": 0.003,
      "Tea algal leaf spot": 0.002,
    },
    model_version: "densenet201-0.1.0",
    latency_ms: 182.5,
    gradcam_overlay: TINY_PNG_BASE64,
    ...overrides,
  };
}

export function uniformFixture(): PredictionResponse {
  const p = 1 / CLASSES.length;
  const probabilities: Record<string, number> = {};
  for (const name of CLASSES) probabilities[name] = p;
  return predictionFixture({
    label: CLASSES[0],
    confidence: p,
    probabilities,
  });
}

export function imageFile(name = "leaf.png", bytes = 2 * 1024 * 1024,
                          type = "image/png"): File {
  return new File([new Uint8Array(bytes)], name, { type });
}

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}
