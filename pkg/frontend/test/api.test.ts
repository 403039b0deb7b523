import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

interface Call {
  url: string;
  init: RequestInit;
}

function clientWith(status: number, body: unknown): { client: ApiClient; calls: Call[] } {
  const calls: Call[] = [];
  const fetchImpl = async (url: string, init: RequestInit): Promise<Response> => {
    calls.push({ url, init });
    return new Response(JSON.stringify(body), { status });
  };
  return { client: new ApiClient("http://srv", "tok-c1", fetchImpl), calls };
}

describe("ApiClient", () => {
  it("sends the bearer token and parses JSON", async () => {
    const { client, calls } = clientWith(200, { programmes: [] });
    const out = await client.listProgrammes();
    expect(out.programmes).toEqual([]);
    expect(calls[0].url).toBe("http://srv/api/programmes");
    expect((calls[0].init.headers as Record<string, string>).Authorization).toBe("Bearer tok-c1");
  });

  it("each action maps to exactly one documented endpoint", async () => {
    const { client, calls } = clientWith(200, {});
    await client.subscribe("p1");
    await client.unsubscribe("sub-1");
    await client.override("sig-1");
    await client.signals("c1");
    await client.schedule("c1");
    await client.resume();
    await client.segmentLoad("seg-1");
    await client.requests();
    expect(calls.map((c) => `${c.init.method} ${c.url.replace("http://srv", "")}`)).toEqual([
      "POST /api/subscriptions",
      "DELETE /api/subscriptions/sub-1",
      "POST /api/signals/sig-1/override",
      "GET /api/customers/c1/signals",
      "GET /api/customers/c1/schedule",
      "POST /api/sim/resume",
      "GET /api/segments/seg-1/load",
      "GET /api/requests",
    ]);
  });

  it("raises ApiError with the server's message on 4xx", async () => {
    const { client } = clientWith(409, { error: "already holds an active subscription" });
    await expect(client.subscribe("p1")).rejects.toThrowError(ApiError);
    await expect(client.subscribe("p1")).rejects.toThrowError(
      "already holds an active subscription",
    );
  });

  it("subscribe posts the programme id as JSON", async () => {
    const { client, calls } = clientWith(201, {});
    await client.subscribe("p9");
    expect(JSON.parse(String(calls[0].init.body))).toEqual({ programme_id: "p9" });
    expect((calls[0].init.headers as Record<string, string>)["Content-Type"]).toBe(
      "application/json",
    );
  });
});
