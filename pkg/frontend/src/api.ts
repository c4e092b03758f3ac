import type { SessionEventHandler, SessionEventName, SessionSummary } from "./types.js";

/** Parses a text/event-stream body chunk by chunk. */
export class SseParser {
  private buffer = "";
  private eventName = "";
  private dataLines: string[] = [];

  constructor(private readonly emit: (name: string, data: string) => void) {}

  feed(chunk: string): void {
    this.buffer += chunk;
    let index: number;
    while ((index = this.buffer.indexOf("\n")) >= 0) {
      const line = this.buffer.slice(0, index).replace(/\r$/, "");
      this.buffer = this.buffer.slice(index + 1);
      this.line(line);
    }
  }

  private line(line: string): void {
    if (line === "") {
      if (this.eventName || this.dataLines.length) {
        this.emit(this.eventName || "message", this.dataLines.join("\n"));
      }
      this.eventName = "";
      this.dataLines = [];
      return;
    }
    if (line.startsWith("event:")) {
      this.eventName = line.slice("event:".length).trim();
    } else if (line.startsWith("data:")) {
      this.dataLines.push(line.slice("data:".length).replace(/^ /, ""));
    }
    // comments and other fields are ignored
  }
}

export interface EventStreamController {
  close(): void;
}

const TERMINAL_EVENTS = new Set(["done", "failed"]);

/**
 * Client for the session service API. The event stream is read over fetch so
 * the same code runs in browsers and in the test harness; drops reconnect
 * with exponential backoff and a state resync in between.
 */
export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async createSession(description: string): Promise<string> {
    const response = await fetch(this.url("/api/sessions"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ description }),
    });
    if (response.status !== 201) {
      throw new Error(`could not create session: HTTP ${response.status}`);
    }
    const body = (await response.json()) as { id: string };
    return body.id;
  }

  async getState(sessionId: string): Promise<SessionSummary> {
    const response = await fetch(this.url(`/api/sessions/${sessionId}`));
    if (!response.ok) {
      throw new Error(`state fetch failed: HTTP ${response.status}`);
    }
    return (await response.json()) as SessionSummary;
  }

  async postAnswers(sessionId: string, answers: string[]): Promise<void> {
    const response = await fetch(this.url(`/api/sessions/${sessionId}/answers`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ answers }),
    });
    if (!response.ok) {
      throw new Error(`answers rejected: HTTP ${response.status}`);
    }
  }

  async postFeedback(sessionId: string, kind: "accept" | "revise", text = ""): Promise<void> {
    const response = await fetch(this.url(`/api/sessions/${sessionId}/feedback`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ kind, text }),
    });
    if (!response.ok) {
      throw new Error(`feedback rejected: HTTP ${response.status}`);
    }
  }

  async fetchText(pathOrRef: string): Promise<string> {
    const target = pathOrRef.startsWith("http") ? pathOrRef : this.url(pathOrRef);
    const response = await fetch(target);
    if (!response.ok) {
      throw new Error(`fetch failed: HTTP ${response.status}`);
    }
    return await response.text();
  }

  async fetchSummary(sessionId: string): Promise<string> {
    return this.fetchText(`/api/sessions/${sessionId}/summary`);
  }

  /**
   * Subscribe to the session event stream. `onResync` runs before every
   * reconnect so the view can realign with GET state.
   */
  openEvents(
    sessionId: string,
    handler: SessionEventHandler,
    onResync?: () => Promise<void> | void,
  ): EventStreamController {
    let closed = false;
    let attempt = 0;

    const connect = async (): Promise<void> => {
      while (!closed) {
        try {
          const response = await fetch(this.url(`/api/sessions/${sessionId}/events`), {
            headers: { Accept: "text/event-stream" },
          });
          if (!response.ok || !response.body) {
            throw new Error(`event stream failed: HTTP ${response.status}`);
          }
          attempt = 0;
          let terminal = false;
          const parser = new SseParser((name, data) => {
            if (TERMINAL_EVENTS.has(name)) {
              terminal = true;
            }
            let payload: unknown = {};
            try {
              payload = data ? JSON.parse(data) : {};
            } catch {
              payload = { raw: data };
            }
            handler(name as SessionEventName, payload);
          });
          const reader = response.body.getReader();
          const decoder = new TextDecoder();
          for (;;) {
            const { done, value } = await reader.read();
            if (done) break;
            parser.feed(decoder.decode(value, { stream: true }));
          }
          if (terminal || closed) {
            return;
          }
        } catch {
          if (closed) return;
        }
        attempt += 1;
        const backoff = Math.min(8000, 250 * 2 ** Math.min(attempt, 5));
        await new Promise((resolve) => setTimeout(resolve, backoff));
        if (onResync && !closed) {
          await onResync();
        }
      }
    };

    void connect();
    return {
      close() {
        closed = true;
      },
    };
  }
}
