// Task workflow state machine: fetch, judge, auto-advance, undo.
// One active task per session; the latch is held for the whole
// submit-flash-advance cycle, so extra keypresses in between do nothing.

import { ApiClient, ApiError, Ordinal, Progress, Task } from "./api";
import { SubmissionLatch } from "./judgments";

export interface SessionEvents {
  onTask?: (task: Task | null) => void;
  onJudged?: (t: Ordinal) => void;
  onProgress?: (progress: Progress) => void;
  onError?: (message: string) => void;
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export class AnnotationSession {
  current: Task | null = null;
  private latch = new SubmissionLatch();

  constructor(
    private readonly api: ApiClient,
    private readonly events: SessionEvents = {},
    private readonly advanceDelayMs = 0,
  ) {}

  async start(): Promise<void> {
    if (!this.latch.tryAcquire()) return;
    try {
      await this.advance();
    } finally {
      this.latch.release();
    }
  }

  /** Submit a judgment for the active task; advances on success. */
  async label(t: Ordinal): Promise<boolean> {
    if (!this.current || !this.latch.tryAcquire()) return false;
    try {
      this.events.onJudged?.(t);
      await this.api.submitLabel(this.current.task_id, t);
      if (this.advanceDelayMs > 0) await sleep(this.advanceDelayMs);
      await this.advance();
      return true;
    } catch (err) {
      this.fail(err);
      return false;
    } finally {
      this.latch.release();
    }
  }

  async skip(): Promise<boolean> {
    if (!this.current || !this.latch.tryAcquire()) return false;
    try {
      await this.api.skipTask(this.current.task_id);
      await this.advance();
      return true;
    } catch (err) {
      this.fail(err);
      return false;
    } finally {
      this.latch.release();
    }
  }

  /** Retract this session's last label; the task comes back for re-judging. */
  async undo(): Promise<boolean> {
    if (!this.latch.tryAcquire()) return false;
    try {
      await this.api.undo();
      await this.advance();
      return true;
    } catch (err) {
      this.fail(err);
      return false;
    } finally {
      this.latch.release();
    }
  }

  private async advance(): Promise<void> {
    this.current = await this.api.nextTask();
    this.events.onTask?.(this.current);
    await this.refreshProgress();
  }

  private async refreshProgress(): Promise<void> {
    if (!this.events.onProgress) return;
    try {
      this.events.onProgress(await this.api.progress());
    } catch {
      // progress display is best-effort
    }
  }

  private fail(err: unknown): void {
    const message =
      err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
    this.events.onError?.(message);
  }
}
