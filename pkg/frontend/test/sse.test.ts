import { describe, expect, it } from "vitest";

import { SseParser, StreamClient, type StreamStatus } from "../src/sse.js";
import type { StreamFrame } from "../src/types.js";

describe("SseParser", () => {
  it("parses one frame per blank line", () => {
    const parser = new SseParser();
    const frames = parser.feed('id: 1\ndata: {"a":1}\n\nid: 2\ndata: {"a":2}\n\n');
    expect(frames).toHaveLength(2);
    expect(frames[0]).toEqual({ id: 1, name: "message", data: '{"a":1}' });
    expect(frames[1].id).toBe(2);
  });

  it("reassembles frames split across arbitrary chunk boundaries", () => {
    const parser = new SseParser();
    const whole = 'id: 7\ndata: {"topic":"signals.c1"}\n\n';
    let frames: ReturnType<SseParser["feed"]> = [];
    for (const ch of whole) {
      frames = frames.concat(parser.feed(ch));
    }
    expect(frames).toHaveLength(1);
    expect(frames[0].id).toBe(7);
    expect(JSON.parse(frames[0].data).topic).toBe("signals.c1");
  });

  it("carries event names and tolerates CRLF", () => {
    const parser = new SseParser();
    const frames = parser.feed("event: end\r\ndata: {}\r\n\r\n");
    expect(frames).toHaveLength(1);
    expect(frames[0].name).toBe("end");
  });

  it("multi-line data joins with newlines", () => {
    const parser = new SseParser();
    const frames = parser.feed("data: a\ndata: b\n\n");
    expect(frames[0].data).toBe("a\nb");
  });
});

function sseResponse(body: string, status = 200): Response {
  const encoder = new TextEncoder();
  const stream = new ReadableStream<Uint8Array>({
    start(controller) {
      controller.enqueue(encoder.encode(body));
      controller.close();
    },
  });
  return new Response(stream, { status });
}

function frame(id: number, topic: string): string {
  const event = { topic, seq: id, t_slot: 0, phase: "dispatch", publisher: "m1", type: "blob", payload: {} };
  return `id: ${id}\ndata: ${JSON.stringify(event)}\n\n`;
}

describe("StreamClient", () => {
  it("delivers frames, tracks the cursor, and stops at the end frame", async () => {
    const calls: string[] = [];
    const fetchImpl = async (url: string): Promise<Response> => {
      calls.push(url);
      return sseResponse(frame(1, "signals.c1") + frame(2, "signals.c1") + "event: end\ndata: {}\n\n");
    };
    const got: StreamFrame[] = [];
    const statuses: StreamStatus[] = [];
    const client = new StreamClient(
      "http://x",
      "tok",
      { onFrame: (f) => got.push(f), onStatus: (s) => statuses.push(s) },
      fetchImpl,
      1,
    );
    await client.run();
    expect(got.map((f) => f.id)).toEqual([1, 2]);
    expect(client.cursor).toBe(2);
    expect(calls).toEqual(["http://x/api/stream?cursor=0"]);
    expect(statuses[0]).toBe("connecting");
    expect(statuses).toContain("open");
    expect(statuses[statuses.length - 1]).toBe("ended");
  });

  it("reconnects from the cursor after a drop, delivering each event once", async () => {
    let attempt = 0;
    const fetchImpl = async (url: string): Promise<Response> => {
      attempt += 1;
      if (attempt === 1) {
        expect(url).toContain("cursor=0");
        return sseResponse(frame(1, "signals.c1")); // closes without end frame
      }
      expect(url).toContain("cursor=1");
      return sseResponse(frame(2, "signals.c1") + "event: end\ndata: {}\n\n");
    };
    const got: StreamFrame[] = [];
    const statuses: StreamStatus[] = [];
    const client = new StreamClient(
      "http://x",
      "tok",
      { onFrame: (f) => got.push(f), onStatus: (s) => statuses.push(s) },
      fetchImpl,
      1,
    );
    await client.run();
    expect(got.map((f) => f.id)).toEqual([1, 2]);
    expect(statuses).toContain("reconnecting");
  });

  it("retries on rejected connections until stopped", async () => {
    let attempts = 0;
    const fetchImpl = async (): Promise<Response> => {
      attempts += 1;
      if (attempts < 3) return new Response("", { status: 503 });
      return sseResponse("event: end\ndata: {}\n\n");
    };
    const client = new StreamClient(
      "http://x",
      "tok",
      { onFrame: () => {}, onStatus: () => {} },
      fetchImpl,
      1,
    );
    await client.run();
    expect(attempts).toBe(3);
  });
});
