// Keyboard mapping, crosshair color convention, and the single-flight
// submission latch that makes rapid double keypresses harmless.

import type { Ordinal } from "./api";

export type Action =
  | { kind: "label"; t: Ordinal }
  | { kind: "skip" }
  | { kind: "undo" };

const KEY_ACTIONS: Record<string, Action> = {
  a: { kind: "label", t: -1 }, // point A more traversable
  b: { kind: "label", t: 1 }, // point B more traversable
  e: { kind: "label", t: 0 }, // equally traversable
  s: { kind: "skip" },
  u: { kind: "undo" },
};

export function actionForKey(key: string): Action | null {
  return KEY_ACTIONS[key.toLowerCase()] ?? null;
}

export const COLOR_NEUTRAL = "#f2f2f2";
export const COLOR_EQUAL = "#ffd500"; // yellow: both points equal
export const COLOR_MORE = "#2e7bff"; // blue: the more traversable point
export const COLOR_LESS = "#ff3030"; // red: the less traversable point

/** Crosshair colors for a judgment; null means not judged yet. */
export function crosshairColors(t: Ordinal | null): { a: string; b: string } {
  if (t === null) return { a: COLOR_NEUTRAL, b: COLOR_NEUTRAL };
  if (t === 0) return { a: COLOR_EQUAL, b: COLOR_EQUAL };
  if (t === 1) return { a: COLOR_LESS, b: COLOR_MORE };
  return { a: COLOR_MORE, b: COLOR_LESS };
}

export class SubmissionLatch {
  private busy = false;

  tryAcquire(): boolean {
    if (this.busy) return false;
    this.busy = true;
    return true;
  }

  release(): void {
    this.busy = false;
  }

  get held(): boolean {
    return this.busy;
  }
}
