// Entry point: wires the API client, session state machine, canvas view,
// and keyboard shortcuts together.

import { ApiClient, Ordinal, Progress, Task } from "./api";
import { actionForKey, crosshairColors } from "./judgments";
import { AnnotationSession } from "./session";
import { renderDone, renderError, renderTask } from "./view";

const JUDGMENT_FLASH_MS = 160;

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function main(): void {
  const params = new URLSearchParams(window.location.search);
  const base = params.get("api") ?? "";
  const sessionName =
    params.get("session") ?? `web-${Math.random().toString(36).slice(2, 8)}`;
  const api = new ApiClient(base, sessionName);
  const stage = el("stage");
  const status = el("status");
  const progressBar = el("progress");

  let renderedTask: Task | null = null;

  const drawTask = (task: Task | null, t: Ordinal | null): void => {
    renderedTask = task;
    if (!task) {
      renderDone(stage);
      return;
    }
    renderTask(stage, task, (p) => api.imageUrl(p), crosshairColors(t)).catch((err) => {
      renderError(stage, String(err), () => drawTask(task, t));
    });
  };

  const session = new AnnotationSession(
    api,
    {
      onTask: (task) => drawTask(task, null),
      onJudged: (t) => drawTask(renderedTask, t), // flash the color convention
      onProgress: (p: Progress) => {
        progressBar.textContent =
          `${p.labeled} labeled / ${p.skipped} skipped / ${p.pending} pending` +
          ` — ${p.equivalent_labels} labels over ${p.images} images` +
          ` (${p.labels_per_two_images.toFixed(2)} per 2 images)`;
      },
      onError: (message) => {
        status.textContent = message;
        window.setTimeout(() => (status.textContent = ""), 4000);
      },
    },
    JUDGMENT_FLASH_MS,
  );

  window.addEventListener("keydown", (event) => {
    if (event.repeat) return;
    const action = actionForKey(event.key);
    if (!action) return;
    event.preventDefault();
    if (action.kind === "label") {
      void session.label(action.t);
    } else if (action.kind === "skip") {
      void session.skip();
    } else {
      void session.undo();
    }
  });

  status.textContent = `session ${sessionName}`;
  void session.start();
}

main();
