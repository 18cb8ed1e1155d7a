import type {
  Axis,
  CallstackPayload,
  FuncPoint,
  RankingPayload,
  Stat,
  StepReport,
} from "./types.js";

type FetchLike = (url: string) => Promise<{
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}>;

export class GatewayError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

/** Thin typed client over the gateway HTTP API. */
export class GatewayClient {
  constructor(
    private readonly base: string,
    private readonly fetchFn: FetchLike = (url) => fetch(url),
  ) {}

  private async get<T>(path: string, params: Record<string, string | number>): Promise<T> {
    const qs = new URLSearchParams(
      Object.entries(params).map(([k, v]) => [k, String(v)]),
    );
    const resp = await this.fetchFn(`${this.base}${path}?${qs}`);
    if (!resp.ok) {
      throw new GatewayError(resp.status, `${path} failed with ${resp.status}`);
    }
    return (await resp.json()) as T;
  }

  ranking(stat: Stat, n: number): Promise<RankingPayload> {
    return this.get("/api/ranking", { stat, n });
  }

  async steps(app: number, rank: number): Promise<StepReport[]> {
    const body = await this.get<{ reports: StepReport[] }>("/api/steps", { app, rank });
    return body.reports;
  }

  async funcview(
    app: number,
    rank: number,
    step: number,
    x: Axis,
    y: Axis,
  ): Promise<FuncPoint[]> {
    const body = await this.get<{ points: FuncPoint[] }>("/api/funcview", {
      app,
      rank,
      step,
      x,
      y,
    });
    return body.points;
  }

  callstack(
    app: number,
    rank: number,
    span: number,
    t0: number,
    t1: number,
  ): Promise<CallstackPayload> {
    return this.get("/api/callstack", { app, rank, span, t0, t1 });
  }

  /** URL for the live SSE stream, optionally filtered to selected ranks. */
  streamUrl(selection: Iterable<string> = []): string {
    const ranks = Array.from(selection).join(",");
    return ranks ? `${this.base}/stream?ranks=${ranks}` : `${this.base}/stream`;
  }
}

/** Incremental server-sent-events parser; feed() raw chunks in any split
 * and get back complete step reports. Keepalive comments are dropped. */
export class SseParser {
  private buffer = "";

  feed(chunk: string): StepReport[] {
    this.buffer += chunk;
    const out: StepReport[] = [];
    let idx: number;
    while ((idx = this.buffer.indexOf("\n\n")) >= 0) {
      const frame = this.buffer.slice(0, idx);
      this.buffer = this.buffer.slice(idx + 2);
      for (const line of frame.split("\n")) {
        if (line.startsWith("data: ")) {
          out.push(JSON.parse(line.slice(6)) as StepReport);
        }
      }
    }
    return out;
  }
}
