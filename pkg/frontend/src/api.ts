import type { Choice, RenderPayload, RunStatus, TripletView } from "./types.js";

/** Thin typed wrapper over the feedback service endpoints. */

export type SubmitResult = "ok" | "conflict";

export interface ApiClient {
  status(): Promise<RunStatus>;
  next(): Promise<TripletView | null>;
  submit(requestId: number, choice: Choice): Promise<SubmitResult>;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

interface NextBody {
  request_id: number;
  payloads: { ref: RenderPayload; a: RenderPayload; b: RenderPayload };
  budget?: { total: number; used: number } | null;
}

export function makeApiClient(base = "", fetchFn: FetchLike = fetch): ApiClient {
  async function getJson<T>(path: string): Promise<T> {
    const res = await fetchFn(`${base}${path}`);
    if (!res.ok) {
      throw new Error(`GET ${path} failed: ${res.status}`);
    }
    return (await res.json()) as T;
  }

  return {
    async status(): Promise<RunStatus> {
      return getJson<RunStatus>("/api/v1/status");
    },

    async next(): Promise<TripletView | null> {
      const res = await fetchFn(`${base}/api/v1/triplets/next`);
      if (res.status === 204) {
        return null;
      }
      if (!res.ok) {
        throw new Error(`GET /api/v1/triplets/next failed: ${res.status}`);
      }
      const body = (await res.json()) as NextBody;
      return {
        requestId: body.request_id,
        ref: body.payloads.ref,
        a: body.payloads.a,
        b: body.payloads.b,
        budget: body.budget ?? null,
      };
    },

    async submit(requestId: number, choice: Choice): Promise<SubmitResult> {
      const res = await fetchFn(`${base}/api/v1/triplets/${requestId}`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ choice }),
      });
      if (res.status === 409) {
        return "conflict";
      }
      if (!res.ok) {
        throw new Error(`POST /api/v1/triplets/${requestId} failed: ${res.status}`);
      }
      return "ok";
    },
  };
}
