/** Wires the drop zone, state machine, renderer, and API client together.
 * One request in flight at a time; submit is a no-op while submitting. */
import { postPredict, type FetchLike } from "./api.js";
import {
  beginSubmit,
  fileAccepted,
  fileRejected,
  idleState,
  reset,
  submitFailed,
  submitSucceeded,
  type UiState,
} from "./state.js";
import { render, type Handlers } from "./render.js";
import { validateFile } from "./validate.js";

export interface AppOptions {
  fetchFn?: FetchLike;
  makePreviewUrl?: (file: File) => string;
  revokePreviewUrl?: (url: string) => void;
}

export class App {
  state: UiState = idleState;
  private readonly handlers: Handlers;
  private readonly fetchFn: FetchLike;
  private readonly makePreviewUrl: (file: File) => string;
  private readonly revokePreviewUrl: (url: string) => void;

  constructor(private readonly root: HTMLElement, options: AppOptions = {}) {
    this.fetchFn = options.fetchFn ?? fetch.bind(globalThis);
    this.makePreviewUrl = options.makePreviewUrl
      ?? ((file) => URL.createObjectURL(file));
    this.revokePreviewUrl = options.revokePreviewUrl
      ?? ((url) => URL.revokeObjectURL(url));
    this.handlers = {
      onFilePicked: (file) => this.selectImage(file),
      onAnalyze: () => { void this.submit(); },
      onReset: () => this.reset(),
    };
    this.attachDragAndDrop();
    this.render();
  }

  private attachDragAndDrop(): void {
    this.root.addEventListener("dragover", (event) => {
      event.preventDefault();
      this.root.classList.add("dragging");
    });
    this.root.addEventListener("dragleave", () => {
      this.root.classList.remove("dragging");
    });
    this.root.addEventListener("drop", (event) => {
      event.preventDefault();
      this.root.classList.remove("dragging");
      const file = event.dataTransfer?.files?.[0];
      if (file) this.selectImage(file);
    });
  }

  selectImage(file: File): void {
    if (this.state.phase === "submitting") return;
    const verdict = validateFile(file);
    if (!verdict.ok) {
      this.update(fileRejected(this.state, verdict.reason));
      return;
    }
    this.dropPreviewUrl();
    this.update(fileAccepted(this.state, file, this.makePreviewUrl(file)));
  }

  async submit(): Promise<void> {
    const submitting = beginSubmit(this.state);
    if (submitting === this.state) return; // not submittable right now
    this.update(submitting);
    const file = submitting.selectedFile as File;
    try {
      const response = await postPredict(file, this.fetchFn);
      this.update(submitSucceeded(this.state, response));
    } catch (err) {
      const message = err instanceof Error && err.message
        ? err.message
        : "network error; check the service and retry";
      this.update(submitFailed(this.state, message));
    }
  }

  reset(): void {
    if (this.state.phase === "submitting") return;
    this.dropPreviewUrl();
    this.update(reset(this.state));
  }

  private dropPreviewUrl(): void {
    if (this.state.previewUrl) this.revokePreviewUrl(this.state.previewUrl);
  }

  private update(next: UiState): void {
    this.state = next;
    this.render();
  }

  private render(): void {
    render(this.state, this.root, this.handlers);
  }
}
