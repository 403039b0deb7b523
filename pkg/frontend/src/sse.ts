// Server-sent-events over fetch: the API authenticates with a bearer header,
// which the native EventSource cannot send. The parser is incremental and
// pure; StreamClient adds reconnect-with-cursor so every event is seen
// exactly once per session even across drops.

import type { StreamEvent, StreamFrame } from "./types.js";

export interface ParsedFrame {
  id: number | null;
  name: string;
  data: string;
}

export class SseParser {
  private buffer = "";
  private id: number | null = null;
  private name = "message";
  private data: string[] = [];

  /** Feed a transport chunk; returns every complete frame it finished. */
  feed(chunk: string): ParsedFrame[] {
    this.buffer += chunk;
    const frames: ParsedFrame[] = [];
    let idx: number;
    while ((idx = this.buffer.indexOf("\n")) >= 0) {
      const line = this.buffer.slice(0, idx).replace(/\r$/, "");
      this.buffer = this.buffer.slice(idx + 1);
      if (line === "") {
        if (this.data.length > 0 || this.name !== "message" || this.id !== null) {
          frames.push({ id: this.id, name: this.name, data: this.data.join("\n") });
        }
        this.id = null;
        this.name = "message";
        this.data = [];
      } else if (line.startsWith("id: ")) {
        this.id = Number(line.slice(4));
      } else if (line.startsWith("event: ")) {
        this.name = line.slice(7);
      } else if (line.startsWith("data: ")) {
        this.data.push(line.slice(6));
      }
      // comments and unknown fields are ignored per the SSE contract
    }
    return frames;
  }
}

export type StreamStatus = "connecting" | "open" | "reconnecting" | "ended" | "stopped";

export interface StreamCallbacks {
  onFrame: (frame: StreamFrame) => void;
  onStatus: (status: StreamStatus) => void;
}

export type FetchLike = (url: string, init: RequestInit) => Promise<Response>;

export class StreamClient {
  cursor = 0;
  private stopped = false;
  private controller: AbortController | null = null;

  constructor(
    private baseUrl: string,
    private token: string,
    private callbacks: StreamCallbacks,
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
    private retryDelayMs = 1000,
  ) {}

  stop(): void {
    this.stopped = true;
    this.controller?.abort();
    this.callbacks.onStatus("stopped");
  }

  /** Runs until the server ends the stream or stop() is called. */
  async run(): Promise<void> {
    while (!this.stopped) {
      this.callbacks.onStatus(this.cursor === 0 ? "connecting" : "reconnecting");
      try {
        this.controller = new AbortController();
        const response = await this.fetchImpl(
          `${this.baseUrl}/api/stream?cursor=${this.cursor}`,
          {
            headers: { Authorization: `Bearer ${this.token}` },
            signal: this.controller.signal,
          },
        );
        if (!response.ok || !response.body) {
          throw new Error(`stream rejected: ${response.status}`);
        }
        this.callbacks.onStatus("open");
        const parser = new SseParser();
        const reader = response.body.getReader();
        const decoder = new TextDecoder();
        for (;;) {
          const { done, value } = await reader.read();
          if (done) break;
          for (const frame of parser.feed(decoder.decode(value, { stream: true }))) {
            if (frame.name === "end") {
              this.callbacks.onStatus("ended");
              return;
            }
            if (frame.id !== null && frame.data) {
              this.cursor = frame.id;
              this.callbacks.onFrame({
                id: frame.id,
                event: JSON.parse(frame.data) as StreamEvent,
              });
            }
          }
        }
        // connection closed without an end frame: resume from the cursor
      } catch (err) {
        if (this.stopped) return;
      }
      if (!this.stopped) {
        await new Promise((resolve) => setTimeout(resolve, this.retryDelayMs));
      }
    }
  }
}
