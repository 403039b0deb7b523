// Thin typed client over the documented endpoints; every mutation in the UI
// goes through exactly one of these calls.

import type {
  Programme,
  RequestRow,
  ScheduleResponse,
  SegmentLoad,
  SignalsResponse,
  SimState,
  Subscription,
} from "./types.js";
import type { FetchLike } from "./sse.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    public baseUrl: string,
    private token: string,
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  get authToken(): string {
    return this.token;
  }

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: {
        Authorization: `Bearer ${this.token}`,
        ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
      },
      ...(body !== undefined ? { body: JSON.stringify(body) } : {}),
    });
    const text = await response.text();
    const parsed = text ? JSON.parse(text) : {};
    if (!response.ok) {
      throw new ApiError(response.status, String(parsed.error ?? response.status));
    }
    return parsed as T;
  }

  listProgrammes(): Promise<{ programmes: Programme[] }> {
    return this.call("GET", "/api/programmes");
  }

  subscribe(programmeId: string): Promise<Subscription> {
    return this.call("POST", "/api/subscriptions", { programme_id: programmeId });
  }

  unsubscribe(subscriptionId: string): Promise<Subscription> {
    return this.call("DELETE", `/api/subscriptions/${subscriptionId}`);
  }

  signals(customerId: string): Promise<SignalsResponse> {
    return this.call("GET", `/api/customers/${customerId}/signals`);
  }

  schedule(customerId: string): Promise<ScheduleResponse> {
    return this.call("GET", `/api/customers/${customerId}/schedule`);
  }

  override(signalId: string): Promise<{ signal_id: string; status: string }> {
    return this.call("POST", `/api/signals/${signalId}/override`);
  }

  simState(): Promise<SimState> {
    return this.call("GET", "/api/sim/state");
  }

  resume(): Promise<SimState> {
    return this.call("POST", "/api/sim/resume");
  }

  segmentLoad(segmentId: string): Promise<SegmentLoad> {
    return this.call("GET", `/api/segments/${segmentId}/load`);
  }

  requests(): Promise<{ requests: RequestRow[] }> {
    return this.call("GET", "/api/requests");
  }

  metrics(): Promise<{ segments?: Record<string, unknown> }> {
    return this.call("GET", "/api/metrics");
  }
}
