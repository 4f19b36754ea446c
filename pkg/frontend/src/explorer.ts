/**
 * Client-side session state.
 *
 * The scheduler turns a stream of control edits into at most one preview
 * request per quiet period and guarantees the rendered table always
 * belongs to the newest edit: requests carry a sequence number, responses
 * that arrive out of order are dropped, and the in-flight request is
 * aborted as soon as a newer one is sent.
 */

import type {
  ConfirmResponse,
  DesignServiceClient,
  PreviewBody,
  PreviewResponse,
  SplitBody,
} from "./api.js";

export const PREVIEW_DEBOUNCE_MS = 150;

export class PreviewScheduler {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private controller: AbortController | null = null;
  private sent = 0;
  private rendered = 0;

  constructor(
    private readonly send: (
      body: PreviewBody,
      signal: AbortSignal,
    ) => Promise<PreviewResponse>,
    private readonly onResult: (response: PreviewResponse) => void,
    private readonly onError: (error: unknown) => void,
    private readonly debounceMs: number = PREVIEW_DEBOUNCE_MS,
  ) {}

  /** Record an edit; the preview fires once edits go quiet. */
  edit(body: PreviewBody): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      this.fire(body);
    }, this.debounceMs);
  }

  /** Drop the pending edit without sending it. */
  cancel(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
    this.controller?.abort();
  }

  private fire(body: PreviewBody): void {
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    const seq = ++this.sent;
    this.send(body, controller.signal).then(
      (response) => {
        if (seq > this.rendered) {
          this.rendered = seq;
          this.onResult(response);
        }
      },
      (error) => {
        if (controller.signal.aborted) return; // superseded, not a failure
        if (seq > this.rendered) {
          this.rendered = seq;
          this.onError(error);
        }
      },
    );
  }
}

/**
 * Confirmed-script bookkeeping for one service session.
 *
 * The local line list mirrors what the service appends on each confirm,
 * so scriptText() stays byte-equal to GET /script. A failed confirm
 * changes nothing on either side.
 */
export class ExplorerSession {
  private lines: string[] = [];
  private confirming = false;

  constructor(
    private readonly client: DesignServiceClient,
    readonly sessionId: string,
  ) {}

  get scriptLines(): readonly string[] {
    return this.lines;
  }

  get confirmInFlight(): boolean {
    return this.confirming;
  }

  /** One newline-terminated line per confirmed split, like the service's script body. */
  scriptText(): string {
    return this.lines.map((line) => `${line}\n`).join("");
  }

  async confirm(split: SplitBody): Promise<ConfirmResponse> {
    if (this.confirming) {
      throw new Error("a confirm is already in flight");
    }
    this.confirming = true;
    try {
      const response = await this.client.confirm(this.sessionId, { split });
      this.lines.push(response.line);
      return response;
    } finally {
      this.confirming = false;
    }
  }
}
