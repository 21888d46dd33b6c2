// Typed client for the annotation service REST API.

export type Ordinal = -1 | 0 | 1;

export interface TaskPoint {
  image_id: string;
  x: number;
  y: number;
  image_url: string;
}

export interface Task {
  task_id: string;
  kind: "intra" | "cross";
  a: TaskPoint;
  b: TaskPoint;
}

export interface Progress {
  total: number;
  pending: number;
  labeled: number;
  skipped: number;
  images: number;
  intra_labeled: number;
  cross_labeled: number;
  equivalent_labels: number;
  labels_per_two_images: number;
}

export class ApiError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly status: number,
  ) {
    super(message);
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  let code = "http_error";
  let message = `${resp.status} ${resp.statusText}`;
  try {
    const body = await resp.json();
    if (body && typeof body.code === "string") {
      code = body.code;
      message = body.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the HTTP status text
  }
  return new ApiError(code, message, resp.status);
}

export class ApiClient {
  constructor(
    public readonly baseUrl: string,
    public readonly session: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private url(path: string): string {
    const sep = path.includes("?") ? "&" : "?";
    return `${this.baseUrl}${path}${sep}session=${encodeURIComponent(this.session)}`;
  }

  /** Next pending task, or null when the pool is exhausted. */
  async nextTask(): Promise<Task | null> {
    const resp = await this.fetchImpl(this.url("/api/tasks/next"));
    if (resp.ok) return (await resp.json()) as Task;
    const err = await parseError(resp);
    if (err.code === "no_pending_tasks") return null;
    throw err;
  }

  async submitLabel(taskId: string, t: Ordinal): Promise<void> {
    const resp = await this.fetchImpl(this.url(`/api/tasks/${encodeURIComponent(taskId)}/label`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ t }),
    });
    if (!resp.ok) throw await parseError(resp);
  }

  async skipTask(taskId: string): Promise<void> {
    const resp = await this.fetchImpl(this.url(`/api/tasks/${encodeURIComponent(taskId)}/skip`), {
      method: "POST",
    });
    if (!resp.ok) throw await parseError(resp);
  }

  async undo(): Promise<{ task_id: string }> {
    const resp = await this.fetchImpl(this.url("/api/undo"), { method: "POST" });
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as { task_id: string };
  }

  async progress(): Promise<Progress> {
    const resp = await this.fetchImpl(`${this.baseUrl}/api/progress`);
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as Progress;
  }

  imageUrl(point: TaskPoint): string {
    return `${this.baseUrl}${point.image_url}`;
  }
}
