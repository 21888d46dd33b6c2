// Canvas rendering: intra tasks on one canvas with two crosshairs, cross
// tasks on two canvases side by side. Crosshairs keep a fixed screen size
// regardless of display scale.

import type { Task, TaskPoint } from "./api";
import { fitScale, imageToScreen } from "./geometry";

const CROSSHAIR_RADIUS = 11;
const MAX_PANE_W = 560;
const MAX_PANE_H = 420;

export interface RenderedView {
  scales: Map<string, number>; // canvas scale per point label ("a" / "b")
}

function drawCrosshair(
  ctx: CanvasRenderingContext2D,
  sx: number,
  sy: number,
  color: string,
  label: string,
): void {
  ctx.save();
  ctx.strokeStyle = color;
  ctx.fillStyle = color;
  ctx.lineWidth = 2.5;
  ctx.beginPath();
  ctx.arc(sx, sy, CROSSHAIR_RADIUS, 0, 2 * Math.PI);
  ctx.stroke();
  ctx.beginPath();
  for (const [dx, dy] of [[-1, 0], [1, 0], [0, -1], [0, 1]] as const) {
    ctx.moveTo(sx + dx * (CROSSHAIR_RADIUS - 4), sy + dy * (CROSSHAIR_RADIUS - 4));
    ctx.lineTo(sx + dx * (CROSSHAIR_RADIUS + 5), sy + dy * (CROSSHAIR_RADIUS + 5));
  }
  ctx.stroke();
  ctx.font = "bold 14px sans-serif";
  ctx.fillText(label.toUpperCase(), sx + CROSSHAIR_RADIUS + 4, sy - CROSSHAIR_RADIUS - 2);
  ctx.restore();
}

function loadImage(src: string): Promise<HTMLImageElement> {
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.onload = () => resolve(img);
    img.onerror = () => reject(new Error(`image failed to load: ${src}`));
    img.src = src;
  });
}

async function renderPane(
  container: HTMLElement,
  imageSrc: string,
  points: Array<{ point: TaskPoint; color: string; label: string }>,
): Promise<number> {
  const img = await loadImage(imageSrc);
  const scale = fitScale(img.naturalWidth, img.naturalHeight, MAX_PANE_W, MAX_PANE_H);
  const canvas = document.createElement("canvas");
  canvas.width = Math.round(img.naturalWidth * scale);
  canvas.height = Math.round(img.naturalHeight * scale);
  canvas.className = "pane";
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("canvas 2d context unavailable");
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(img, 0, 0, canvas.width, canvas.height);
  for (const { point, color, label } of points) {
    const { sx, sy } = imageToScreen(point.x, point.y, scale);
    drawCrosshair(ctx, sx, sy, color, label);
  }
  container.appendChild(canvas);
  return scale;
}

export async function renderTask(
  container: HTMLElement,
  task: Task,
  imageUrl: (p: TaskPoint) => string,
  colors: { a: string; b: string },
): Promise<RenderedView> {
  container.replaceChildren();
  const scales = new Map<string, number>();
  if (task.kind === "intra") {
    const scale = await renderPane(container, imageUrl(task.a), [
      { point: task.a, color: colors.a, label: "a" },
      { point: task.b, color: colors.b, label: "b" },
    ]);
    scales.set("a", scale);
    scales.set("b", scale);
  } else {
    scales.set(
      "a",
      await renderPane(container, imageUrl(task.a), [
        { point: task.a, color: colors.a, label: "a" },
      ]),
    );
    scales.set(
      "b",
      await renderPane(container, imageUrl(task.b), [
        { point: task.b, color: colors.b, label: "b" },
      ]),
    );
  }
  return { scales };
}

export function renderError(container: HTMLElement, message: string, retry: () => void): void {
  container.replaceChildren();
  const box = document.createElement("div");
  box.className = "error";
  box.textContent = message;
  const button = document.createElement("button");
  button.textContent = "retry";
  button.onclick = retry;
  box.appendChild(document.createElement("br"));
  box.appendChild(button);
  container.appendChild(box);
}

export function renderDone(container: HTMLElement): void {
  container.replaceChildren();
  const box = document.createElement("div");
  box.className = "done";
  box.textContent = "All tasks labeled. Thank you!";
  container.appendChild(box);
}
