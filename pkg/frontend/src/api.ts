// Thin client over the synthesizer service. Every method returns the
// parsed JSON body; non-2xx responses throw ApiError with the server's
// detail string so the UI can show it inline.

export interface SchemaColumn {
  name: string;
  kind: string; // "continuous" | "categorical" | "mixed"
  include: boolean;
  target: boolean;
  categorical_values?: number[];
  log_transform?: boolean;
}

export interface SchemaDoc {
  columns: SchemaColumn[];
  target: { column: string; problem: string } | null;
}

export interface JobDoc {
  id: string;
  kind: string;
  state: "queued" | "running" | "done" | "failed";
  progress: {
    epoch: number;
    total_epochs: number;
    history: Record<string, number[]>;
  } | null;
  error: string | null;
  started_at: number | null;
  finished_at: number | null;
}

export interface SchemaOverrides {
  columns?: Record<
    string,
    {
      kind?: string;
      categorical_values?: number[];
      log_transform?: boolean;
      include?: boolean;
    }
  >;
  target?: { column: string; problem: string } | null;
}

export interface TrainRequest {
  dataset_id: string;
  epochs: number;
  batch_size?: number;
  seed?: number;
  classifier?: boolean;
  info_loss?: boolean;
  vgm?: boolean;
  problem?: string;
}

export class ApiError extends Error {
  status: number;
  constructor(status: number, detail: string) {
    super(detail);
    this.status = status;
  }
}

async function unwrap(res: Response): Promise<any> {
  if (res.ok) return res.json();
  let detail = res.statusText;
  try {
    const body = await res.json();
    if (body && body.detail) detail = String(body.detail);
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(res.status, detail);
}

export class ApiClient {
  base: string;

  constructor(base: string) {
    this.base = base.replace(/\/$/, "");
  }

  async uploadDataset(
    file: Blob,
    name: string,
  ): Promise<{ id: string; schema: SchemaDoc }> {
    const form = new FormData();
    form.append("file", file, name);
    return unwrap(await fetch(`${this.base}/datasets`, { method: "POST", body: form }));
  }

  async getDataset(id: string): Promise<{ id: string; schema: SchemaDoc }> {
    return unwrap(await fetch(`${this.base}/datasets/${id}`));
  }

  async putSchema(
    id: string,
    overrides: SchemaOverrides,
  ): Promise<{ id: string; schema: SchemaDoc }> {
    return unwrap(
      await fetch(`${this.base}/datasets/${id}/schema`, {
        method: "PUT",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(overrides),
      }),
    );
  }

  async trainModel(req: TrainRequest): Promise<{ job_id: string; model_id: string }> {
    return unwrap(
      await fetch(`${this.base}/models`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(req),
      }),
    );
  }

  async getModel(id: string): Promise<any> {
    return unwrap(await fetch(`${this.base}/models/${id}`));
  }

  async getJob(id: string): Promise<JobDoc> {
    return unwrap(await fetch(`${this.base}/jobs/${id}`));
  }

  async synthesize(
    modelId: string,
    rows: number,
    seed?: number,
  ): Promise<{ job_id: string; synthetic_id: string }> {
    const body: Record<string, number> = { rows };
    if (seed !== undefined) body.seed = seed;
    return unwrap(
      await fetch(`${this.base}/models/${modelId}/synthesize`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      }),
    );
  }

  syntheticCsvUrl(syntheticId: string): string {
    return `${this.base}/synthetic/${syntheticId}.csv`;
  }

  async fetchSyntheticCsv(syntheticId: string): Promise<string> {
    const res = await fetch(this.syntheticCsvUrl(syntheticId));
    if (!res.ok) throw new ApiError(res.status, res.statusText);
    return res.text();
  }

  async requestReport(
    modelId: string,
    syntheticId: string,
  ): Promise<{ job_id: string; report_id: string }> {
    return unwrap(
      await fetch(`${this.base}/reports`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ model_id: modelId, synthetic_id: syntheticId }),
      }),
    );
  }

  async getReport(id: string): Promise<any> {
    return unwrap(await fetch(`${this.base}/reports/${id}`));
  }

  // Poll a job until it leaves the queue. onTick fires after every
  // fetch so callers can render progress; interval defaults to the 1s
  // cadence the dashboard uses.
  async waitForJob(
    id: string,
    onTick?: (job: JobDoc) => void,
    intervalMs = 1000,
    timeoutMs = 15 * 60 * 1000,
  ): Promise<JobDoc> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const job = await this.getJob(id);
      if (onTick) onTick(job);
      if (job.state === "done" || job.state === "failed") return job;
      if (Date.now() > deadline) throw new ApiError(408, `job ${id} timed out`);
      await new Promise((r) => setTimeout(r, intervalMs));
    }
  }
}
