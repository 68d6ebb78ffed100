// Long-lived /events reader: line-delimited JSON over a plain fetch
// body. Reconnects with backoff; connection state feeds the banner.

import type { TickReport } from './types.js';

export interface SplitResult {
  lines: string[];
  rest: string;
}

/** Split buffered text plus a new chunk into complete lines. */
export function splitLines(buffer: string, chunk: string): SplitResult {
  const parts = (buffer + chunk).split('\n');
  const rest = parts.pop() ?? '';
  return { lines: parts.filter((l) => l.length > 0), rest };
}

export interface StreamHandlers {
  onReport: (report: TickReport) => void;
  onStatus: (connected: boolean) => void;
}

const BACKOFF_START_MS = 500;
const BACKOFF_CAP_MS = 5000;

export class ReportStream {
  private stopped = false;
  private controller: AbortController | null = null;

  constructor(
    private readonly base: string,
    private readonly handlers: StreamHandlers
  ) {}

  start(): void {
    this.stopped = false;
    void this.loop();
  }

  stop(): void {
    this.stopped = true;
    this.controller?.abort();
  }

  private async loop(): Promise<void> {
    let backoff = BACKOFF_START_MS;
    while (!this.stopped) {
      try {
        this.controller = new AbortController();
        const resp = await fetch(this.base + '/events', {
          signal: this.controller.signal,
        });
        if (!resp.ok || resp.body === null) {
          throw new Error(`stream refused: ${resp.status}`);
        }
        this.handlers.onStatus(true);
        const reader = resp.body.getReader();
        const decoder = new TextDecoder();
        let buffer = '';
        for (;;) {
          const { done, value } = await reader.read();
          if (done) {
            break;
          }
          const split = splitLines(buffer, decoder.decode(value, { stream: true }));
          buffer = split.rest;
          for (const line of split.lines) {
            backoff = BACKOFF_START_MS; // healthy stream resets the clock
            this.handlers.onReport(JSON.parse(line) as TickReport);
          }
        }
      } catch {
        // fall through to reconnect
      }
      if (this.stopped) {
        break;
      }
      this.handlers.onStatus(false);
      await new Promise((resolve) => setTimeout(resolve, backoff));
      backoff = Math.min(backoff * 2, BACKOFF_CAP_MS);
    }
  }
}
