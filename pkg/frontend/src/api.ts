/**
 * Typed fetch client for the design service.
 *
 * The client does no arithmetic of its own: everything it returns is the
 * service's response, decoded. Error responses carry the core error class
 * name, which the UI uses to place messages next to the right control.
 */

export interface ColumnInfo {
  name: string;
  type: "integer" | "real" | "text";
}

export interface SessionInfo {
  session_id: string;
  columns: ColumnInfo[];
  row_count: number;
}

/** Column-oriented table as the service encodes it. */
export interface TablePayload {
  columns: string[];
  types: string[];
  data: (number | string | null)[][];
}

export interface SplitBody {
  strata: string;
  split_var: string;
  type: string;
  split_at: Array<number | string | string[]>;
  targets?: string[];
  trunc?: string | number;
}

export interface AllocationBody {
  strata?: string;
  y?: string;
  nsample?: number;
  method?: string;
  already_sampled?: string;
}

export interface PreviewBody {
  split?: SplitBody;
  allocation: AllocationBody;
}

export interface PreviewResponse {
  design: TablePayload;
  strata_counts: Record<string, number>;
}

export interface ConfirmResponse {
  line: string;
  strata_counts: Record<string, number>;
}

export interface StateResponse {
  columns: ColumnInfo[];
  row_count: number;
  strata_col: string | null;
  strata_counts: Record<string, number> | null;
}

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly kind: string,
    message: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

async function raiseFrom(response: Response): Promise<never> {
  let kind = "HttpError";
  let message = `${response.status} ${response.statusText}`;
  try {
    const body = await response.json();
    if (typeof body.error === "string") kind = body.error;
    if (typeof body.message === "string") message = body.message;
  } catch {
    // not a JSON body; keep the status line
  }
  throw new ServiceError(response.status, kind, message);
}

export class DesignServiceClient {
  private readonly base: string;

  constructor(baseUrl: string) {
    this.base = baseUrl.replace(/\/+$/, "");
  }

  async uploadCsv(text: string): Promise<SessionInfo> {
    const response = await fetch(`${this.base}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "text/csv" },
      body: text,
    });
    if (!response.ok) return raiseFrom(response);
    return response.json();
  }

  async preview(
    sessionId: string,
    body: PreviewBody,
    signal?: AbortSignal,
  ): Promise<PreviewResponse> {
    const response = await fetch(`${this.base}/sessions/${sessionId}/preview`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    if (!response.ok) return raiseFrom(response);
    return response.json();
  }

  async confirm(sessionId: string, body: { split: SplitBody }): Promise<ConfirmResponse> {
    const response = await fetch(`${this.base}/sessions/${sessionId}/confirm`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) return raiseFrom(response);
    return response.json();
  }

  /** The replayable CLI script, verbatim. */
  async script(sessionId: string): Promise<string> {
    const response = await fetch(`${this.base}/sessions/${sessionId}/script`);
    if (!response.ok) return raiseFrom(response);
    return response.text();
  }

  async state(sessionId: string, strata?: string): Promise<StateResponse> {
    const query = strata === undefined ? "" : `?strata=${encodeURIComponent(strata)}`;
    const response = await fetch(`${this.base}/sessions/${sessionId}/state${query}`);
    if (!response.ok) return raiseFrom(response);
    return response.json();
  }
}
