import type { ApiClient, SubmitResult } from "./api.js";
import type { Choice, RunStatus, TripletView } from "./types.js";
import { payloadProblem, renderPayload } from "./render.js";

/**
 * Annotation loop driving the labeler: poll the service for status and the
 * next pending triplet, render it, submit exactly one choice per request, and
 * surface every failure instead of dropping a judgment.
 */

export type Phase =
  | "connecting"
  | "waiting"
  | "showing"
  | "submitting"
  | "done"
  | "failed"
  | "error";

export interface TripletSvg {
  ref: string;
  a: string;
  b: string;
}

export interface AppView {
  phase: Phase;
  banner: string | null;
  status: RunStatus | null;
  triplet: TripletView | null;
  svg: TripletSvg | null;
}

export interface AppOptions {
  /** Additional submit attempts after the first failed one. */
  retries?: number;
  /** Base backoff delay in ms, doubled on each retry. */
  backoffMs?: number;
  sleep?: (ms: number) => Promise<void>;
  onChange?: (view: AppView) => void;
}

function describe(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}

const TERMINAL: Phase[] = ["done", "failed"];

export class LabelerApp {
  private readonly api: ApiClient;
  private readonly retries: number;
  private readonly backoffMs: number;
  private readonly sleep: (ms: number) => Promise<void>;
  private readonly onChange: (view: AppView) => void;
  private readonly submitted = new Set<number>();

  private phase: Phase = "connecting";
  private banner: string | null = null;
  private status: RunStatus | null = null;
  private triplet: TripletView | null = null;
  private svg: TripletSvg | null = null;
  private busy = false;

  constructor(api: ApiClient, options: AppOptions = {}) {
    this.api = api;
    this.retries = options.retries ?? 3;
    this.backoffMs = options.backoffMs ?? 250;
    this.sleep = options.sleep ?? ((ms) => new Promise((resolve) => setTimeout(resolve, ms)));
    this.onChange = options.onChange ?? (() => {});
  }

  view(): AppView {
    return {
      phase: this.phase,
      banner: this.banner,
      status: this.status,
      triplet: this.triplet,
      svg: this.svg,
    };
  }

  get finished(): boolean {
    return TERMINAL.includes(this.phase);
  }

  private notify(): void {
    this.onChange(this.view());
  }

  private show(triplet: TripletView): void {
    const problem =
      payloadProblem(triplet.ref) ?? payloadProblem(triplet.a) ?? payloadProblem(triplet.b);
    if (problem !== null) {
      this.triplet = null;
      this.svg = null;
      this.phase = "error";
      this.banner = `request ${triplet.requestId} cannot be rendered (${problem})`;
      return;
    }
    this.triplet = triplet;
    this.svg = {
      ref: renderPayload(triplet.ref),
      a: renderPayload(triplet.a),
      b: renderPayload(triplet.b),
    };
    this.phase = "showing";
    this.banner = null;
  }

  /** One poll tick; skipped while another request is in flight. */
  async pollOnce(): Promise<void> {
    if (this.busy || this.finished) {
      return;
    }
    this.busy = true;
    try {
      const status = await this.api.status();
      this.status = status;
      if (status.state === "done") {
        this.phase = "done";
        this.triplet = null;
        this.svg = null;
      } else if (status.state === "failed") {
        this.phase = "failed";
        this.banner = status.error ?? "run failed";
        this.triplet = null;
        this.svg = null;
      } else if (this.triplet === null && this.phase !== "error") {
        const next = await this.api.next();
        if (next === null) {
          this.phase = "waiting";
        } else if (this.submitted.has(next.requestId)) {
          // Our answer is still propagating; keep waiting for a fresh request.
          this.phase = "waiting";
        } else {
          this.show(next);
        }
      }
    } catch (err) {
      if (this.triplet === null && !this.finished && this.phase !== "error") {
        this.phase = "connecting";
      }
      this.banner = `connection problem: ${describe(err)}`;
    } finally {
      this.busy = false;
      this.notify();
    }
  }

  /**
   * Submit the displayed triplet. Each request id is sent at most once;
   * transient network failures are retried with backoff, and an exhausted
   * retry budget releases the guard so the same triplet can be re-served.
   */
  async choose(choice: Choice): Promise<void> {
    const current = this.triplet;
    if (current === null || this.phase !== "showing" || this.submitted.has(current.requestId)) {
      return;
    }
    this.submitted.add(current.requestId);
    this.phase = "submitting";
    this.notify();

    let result: SubmitResult | null = null;
    let failure: unknown = null;
    for (let attempt = 0; attempt <= this.retries; attempt += 1) {
      if (attempt > 0) {
        await this.sleep(this.backoffMs * 2 ** (attempt - 1));
      }
      try {
        result = await this.api.submit(current.requestId, choice);
        failure = null;
        break;
      } catch (err) {
        failure = err;
      }
    }

    this.triplet = null;
    this.svg = null;
    this.phase = "waiting";
    if (result === null) {
      // Release the guard so the scheduled poll re-serves the triplet; the
      // user retries instead of losing the judgment.
      this.submitted.delete(current.requestId);
      this.banner = `could not submit request ${current.requestId}: ${describe(failure)}`;
      this.notify();
      return;
    }
    this.banner =
      result === "conflict"
        ? `request ${current.requestId} was already resolved, fetching the next one`
        : null;
    this.notify();
    await this.pollOnce();
  }
}

/** Keyboard mapping: left picks A, right picks B, space skips. */
export function choiceForKey(key: string): Choice | null {
  switch (key) {
    case "ArrowLeft":
      return "A";
    case "ArrowRight":
      return "B";
    case " ":
    case "Spacebar":
      return "skip";
    default:
      return null;
  }
}
