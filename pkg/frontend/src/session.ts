import { ApiClient, ApiError } from "./api.js";
import type { TaskView } from "./types.js";

export interface Progress {
  labeled: number;
  total: number;
  canAdvance: boolean;
}

/**
 * Batch review session: the annotator walks the pending batch, types a draft
 * per task, submits, and finally advances the iteration.
 *
 * The server is the source of truth: a confirmed label is never overwritten
 * by a local draft unless the caller edits explicitly, and reloading the
 * session rebuilds everything from the API.
 */
export class ReviewSession {
  private readonly client: ApiClient;
  private views: TaskView[] = [];
  private cursor = 0;
  private loaded = false;

  constructor(client: ApiClient) {
    this.client = client;
  }

  async load(): Promise<void> {
    const tasks = await this.client.getTasks();
    this.views = tasks.map((task) => ({
      task,
      draft: task.submitted_text ?? "",
      saveStatus: task.submitted_text !== null ? "saved" : "draft",
      errorMessage: null,
    }));
    this.cursor = Math.max(
      this.views.findIndex((v) => v.saveStatus !== "saved"),
      0,
    );
    this.loaded = true;
  }

  get isEmpty(): boolean {
    return this.loaded && this.views.length === 0;
  }

  tasks(): readonly TaskView[] {
    return this.views;
  }

  current(): TaskView | null {
    return this.views[this.cursor] ?? null;
  }

  next(): TaskView | null {
    if (this.views.length === 0) return null;
    this.cursor = (this.cursor + 1) % this.views.length;
    return this.current();
  }

  nextUnlabeled(): TaskView | null {
    const start = this.cursor;
    for (let step = 1; step <= this.views.length; step += 1) {
      const i = (start + step) % this.views.length;
      if (this.views[i].saveStatus !== "saved") {
        this.cursor = i;
        return this.views[i];
      }
    }
    return this.current();
  }

  setDraft(text: string): void {
    const view = this.current();
    if (!view) return;
    view.draft = text;
    if (view.saveStatus !== "saved") {
      view.saveStatus = "draft";
      view.errorMessage = null;
    }
  }

  /** Submit the current draft; on conflict the draft is kept and the error shown. */
  async submitCurrent(): Promise<TaskView | null> {
    const view = this.current();
    if (!view) return null;
    view.saveStatus = "saving";
    view.errorMessage = null;
    try {
      const result = await this.client.submitLabel(view.task.sample_id, view.draft);
      view.saveStatus = "saved";
      view.task = { ...view.task, status: result.status, submitted_text: view.draft };
      return view;
    } catch (error) {
      view.saveStatus = "error";
      view.errorMessage =
        error instanceof ApiError ? error.message : "network error; retry";
      return view;
    }
  }

  /** Replace the local draft with the server-confirmed text, explicitly. */
  adoptServerText(): void {
    const view = this.current();
    if (view && view.task.submitted_text !== null) {
      view.draft = view.task.submitted_text;
      view.saveStatus = "saved";
      view.errorMessage = null;
    }
  }

  progress(): Progress {
    const labeled = this.views.filter((v) => v.saveStatus === "saved").length;
    return {
      labeled,
      total: this.views.length,
      canAdvance: this.views.length > 0 && labeled === this.views.length,
    };
  }

  async advance(allowSkip = false): Promise<number> {
    const result = await this.client.advance(allowSkip);
    this.views = [];
    this.cursor = 0;
    this.loaded = false;
    return result.iteration;
  }
}
