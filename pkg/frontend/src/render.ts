/** DOM rendering: one function of state, rebuilt on every transition.
 * Class names come back from the service and are shown verbatim; the only
 * reordering anywhere is the explicit descending sort of the result list. */
import type { UiState } from "./state.js";
import type { PredictionResponse } from "./types.js";

export interface Handlers {
  onFilePicked: (file: File) => void;
  onAnalyze: () => void;
  onReset: () => void;
}

function el<K extends keyof HTMLElementTagNameMap>(
    tag: K, className?: string, text?: string): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function percent(value: number): string {
  return `${(value * 100).toFixed(1)}%`;
}

/** Probability entries sorted by descending value; ties keep the service's
 * class order (Array.prototype.sort is stable). */
export function sortedProbabilities(response: PredictionResponse):
    Array<[string, number]> {
  return Object.entries(response.probabilities)
    .sort((a, b) => b[1] - a[1]);
}

function renderDropZone(handlers: Handlers, note?: string): HTMLElement {
  const zone = el("div", "drop-zone");
  zone.dataset.testid = "drop-zone";
  zone.append(el("p", "drop-hint",
                 "Drag and drop a leaf photo here, or choose a file"));
  if (note) zone.append(el("p", "drop-note", note));
  const input = el("input") as HTMLInputElement;
  input.type = "file";
  input.accept = "image/*";
  input.dataset.testid = "file-input";
  input.addEventListener("change", () => {
    if (input.files && input.files.length > 0) {
      handlers.onFilePicked(input.files[0]);
    }
  });
  zone.append(input);
  return zone;
}

function renderPreviewFigure(state: UiState): HTMLElement {
  const figure = el("figure", "preview");
  const img = el("img") as HTMLImageElement;
  img.dataset.testid = "preview-image";
  if (state.previewUrl) img.src = state.previewUrl;
  img.alt = state.selectedFile ? state.selectedFile.name : "selected leaf";
  figure.append(img);
  if (state.selectedFile) {
    figure.append(el("figcaption", "file-name", state.selectedFile.name));
  }
  return figure;
}

function renderButtons(state: UiState, handlers: Handlers): HTMLElement {
  const row = el("div", "buttons");
  const analyze = el("button", "analyze",
                     state.phase === "submitting" ? "Analyzing…" : "Analyze");
  analyze.dataset.testid = "analyze-button";
  analyze.disabled = state.phase === "submitting" || !state.selectedFile;
  analyze.addEventListener("click", handlers.onAnalyze);
  const resetBtn = el("button", "reset", "Reset");
  resetBtn.dataset.testid = "reset-button";
  resetBtn.disabled = state.phase === "submitting";
  resetBtn.addEventListener("click", handlers.onReset);
  row.append(analyze, resetBtn);
  return row;
}

function bar(fraction: number, labelText: string, value: string,
             testid: string): HTMLElement {
  const wrap = el("div", "bar-row");
  wrap.dataset.testid = testid;
  wrap.append(el("span", "bar-label", labelText));
  const track = el("div", "bar-track");
  const fill = el("div", "bar-fill");
  fill.style.width = `${Math.max(0, Math.min(1, fraction)) * 100}%`;
  track.append(fill);
  wrap.append(track);
  wrap.append(el("span", "bar-value", value));
  return wrap;
}

function renderResult(state: UiState): HTMLElement {
  const response = state.response as PredictionResponse;
  const section = el("section", "result");
  section.dataset.testid = "result";

  const heading = el("h2", "diagnosis",
                     `${response.label} — ${percent(response.confidence)}`);
  heading.dataset.testid = "diagnosis";
  section.append(heading);
  section.append(bar(response.confidence, "confidence",
                     percent(response.confidence), "confidence-bar"));

  const pair = el("div", "image-pair");
  const original = renderPreviewFigure(state);
  original.append(el("figcaption", "caption", "original"));
  pair.append(original);
  if (response.gradcam_overlay) {
    const figure = el("figure", "overlay");
    const img = el("img") as HTMLImageElement;
    img.dataset.testid = "overlay-image";
    img.src = `data:image/png;base64,${response.gradcam_overlay}`;
    img.alt = "Grad-CAM overlay highlighting influential regions";
    figure.append(img, el("figcaption", "caption", "Grad-CAM overlay"));
    pair.append(figure);
  }
  section.append(pair);

  const list = el("ul", "probabilities");
  list.dataset.testid = "probability-list";
  for (const [name, p] of sortedProbabilities(response)) {
    const item = el("li");
    item.append(bar(p, name, percent(p), `probability-${name}`));
    list.append(item);
  }
  section.append(list);
  section.append(el("p", "model-version",
                    `model ${response.model_version} · `
                    + `${response.latency_ms.toFixed(0)} ms`));
  return section;
}

export function render(state: UiState, root: HTMLElement,
                       handlers: Handlers): void {
  root.replaceChildren();
  root.dataset.phase = state.phase;

  const title = el("h1", "title", "Tea Leaf Diagnosis");
  root.append(title);

  switch (state.phase) {
    case "idle":
      root.append(renderDropZone(handlers));
      break;
    case "preview":
      root.append(renderPreviewFigure(state), renderButtons(state, handlers));
      break;
    case "submitting": {
      root.append(renderPreviewFigure(state), renderButtons(state, handlers));
      const busy = el("p", "busy", "Analyzing…");
      busy.dataset.testid = "busy";
      root.append(busy);
      break;
    }
    case "result":
      root.append(renderResult(state), renderButtons(state, handlers));
      break;
    case "error": {
      const banner = el("div", "error-banner",
                        state.errorMessage ?? "something went wrong");
      banner.dataset.testid = "error-banner";
      root.append(banner);
      if (state.selectedFile) {
        // keep the preview visible; Analyze doubles as Retry
        root.append(renderPreviewFigure(state),
                    renderButtons(state, handlers));
      } else {
        root.append(renderDropZone(handlers, "try another file"),
                    renderButtons(state, handlers));
      }
      break;
    }
  }
}
