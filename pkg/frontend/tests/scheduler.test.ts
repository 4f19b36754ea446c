import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import type { PreviewBody, PreviewResponse } from "../src/api.js";
import { PREVIEW_DEBOUNCE_MS, PreviewScheduler } from "../src/explorer.js";

interface Deferred {
  promise: Promise<PreviewResponse>;
  resolve: (value: PreviewResponse) => void;
  reject: (error: unknown) => void;
}

function deferred(): Deferred {
  let resolve!: (value: PreviewResponse) => void;
  let reject!: (error: unknown) => void;
  const promise = new Promise<PreviewResponse>((res, rej) => {
    resolve = res;
    reject = rej;
  });
  return { promise, resolve, reject };
}

function response(tag: string): PreviewResponse {
  return {
    design: { columns: ["strata"], types: ["text"], data: [[tag]] },
    strata_counts: {},
  };
}

function body(nsample: number): PreviewBody {
  return { allocation: { y: "y", nsample } };
}

/** Let the scheduler's then-callbacks run. */
async function flush(): Promise<void> {
  for (let i = 0; i < 5; i++) await Promise.resolve();
}

describe("PreviewScheduler", () => {
  let requests: { body: PreviewBody; signal: AbortSignal; d: Deferred }[];
  let rendered: PreviewResponse[];
  let errors: unknown[];
  let scheduler: PreviewScheduler;

  beforeEach(() => {
    vi.useFakeTimers();
    requests = [];
    rendered = [];
    errors = [];
    scheduler = new PreviewScheduler(
      (requestBody, signal) => {
        const d = deferred();
        requests.push({ body: requestBody, signal, d });
        return d.promise;
      },
      (r) => rendered.push(r),
      (e) => errors.push(e),
    );
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  it("debounces for 150 ms", () => {
    expect(PREVIEW_DEBOUNCE_MS).toBe(150);
    scheduler.edit(body(10));
    vi.advanceTimersByTime(149);
    expect(requests).toHaveLength(0);
    vi.advanceTimersByTime(1);
    expect(requests).toHaveLength(1);
  });

  it("two rapid edits yield one request and one rendered table", async () => {
    scheduler.edit(body(10));
    vi.advanceTimersByTime(100);
    scheduler.edit(body(20));
    vi.advanceTimersByTime(150);
    expect(requests).toHaveLength(1);
    expect(requests[0]!.body.allocation.nsample).toBe(20);
    requests[0]!.d.resolve(response("final"));
    await flush();
    expect(rendered).toHaveLength(1);
    expect(rendered[0]!.design.data[0]![0]).toBe("final");
  });

  it("drops a response that arrives after a newer one", async () => {
    scheduler.edit(body(1));
    vi.advanceTimersByTime(150);
    scheduler.edit(body(2));
    vi.advanceTimersByTime(150);
    expect(requests).toHaveLength(2);
    requests[1]!.d.resolve(response("second"));
    await flush();
    requests[0]!.d.resolve(response("first"));
    await flush();
    expect(rendered.map((r) => r.design.data[0]![0])).toEqual(["second"]);
  });

  it("drops a stale error after a newer success", async () => {
    scheduler.edit(body(1));
    vi.advanceTimersByTime(150);
    scheduler.edit(body(2));
    vi.advanceTimersByTime(150);
    requests[1]!.d.resolve(response("second"));
    await flush();
    requests[0]!.d.reject(new Error("too late"));
    await flush();
    expect(errors).toHaveLength(0);
    expect(rendered).toHaveLength(1);
  });

  it("reports the newest failure", async () => {
    scheduler.edit(body(1));
    vi.advanceTimersByTime(150);
    requests[0]!.d.reject(new Error("infeasible"));
    await flush();
    expect(errors).toHaveLength(1);
    scheduler.edit(body(2));
    vi.advanceTimersByTime(150);
    requests[1]!.d.resolve(response("recovered"));
    await flush();
    expect(rendered).toHaveLength(1);
  });

  it("aborts the in-flight request when a newer edit fires", async () => {
    scheduler.edit(body(1));
    vi.advanceTimersByTime(150);
    expect(requests[0]!.signal.aborted).toBe(false);
    scheduler.edit(body(2));
    vi.advanceTimersByTime(150);
    expect(requests[0]!.signal.aborted).toBe(true);
    // an aborted request settling with an error is not a failure
    requests[0]!.d.reject(new DOMException("aborted", "AbortError"));
    await flush();
    expect(errors).toHaveLength(0);
  });

  it("cancel drops the pending edit without sending", () => {
    scheduler.edit(body(1));
    scheduler.cancel();
    vi.advanceTimersByTime(300);
    expect(requests).toHaveLength(0);
  });
});
