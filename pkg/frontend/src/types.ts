/** Wire types for the tealeaf inference service. */

export interface PredictionResponse {
  label: string;
  confidence: number;
  probabilities: Record<string, number>;
  model_version: string;
  latency_ms: number;
  /** base64 PNG; absent when the request asked for explain=false */
  gradcam_overlay?: string;
}

export interface ApiError {
  error: string;
  message: string;
}
