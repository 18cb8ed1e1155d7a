import { describe, expect, it } from "vitest";

import { GatewayClient, GatewayError, SseParser } from "../src/api";

function stubFetch(payload: unknown, status = 200) {
  const calls: string[] = [];
  const fetchFn = async (url: string) => {
    calls.push(url);
    return { ok: status < 400, status, json: async () => payload };
  };
  return { calls, fetchFn };
}

describe("gateway client", () => {
  it("builds ranking query urls", async () => {
    const { calls, fetchFn } = stubFetch({ stat: "std", top: [], bottom: [] });
    const client = new GatewayClient("http://gw", fetchFn);
    await client.ranking("std", 5);
    expect(calls).toEqual(["http://gw/api/ranking?stat=std&n=5"]);
  });

  it("unwraps funcview points", async () => {
    const { calls, fetchFn } = stubFetch({ points: [{ x: 1, y: 2, span: {} }] });
    const client = new GatewayClient("", fetchFn);
    const points = await client.funcview(0, 3, 7, "entry", "fid");
    expect(points).toHaveLength(1);
    expect(calls[0]).toBe("/api/funcview?app=0&rank=3&step=7&x=entry&y=fid");
  });

  it("raises GatewayError with the status code", async () => {
    const { fetchFn } = stubFetch({}, 404);
    const client = new GatewayClient("", fetchFn);
    await expect(client.steps(0, 0)).rejects.toMatchObject({ status: 404 });
    await expect(client.steps(0, 0)).rejects.toBeInstanceOf(GatewayError);
  });

  it("builds stream urls with and without a selection", () => {
    const client = new GatewayClient("http://gw");
    expect(client.streamUrl()).toBe("http://gw/stream");
    expect(client.streamUrl(["0:1", "0:4"])).toBe("http://gw/stream?ranks=0:1,0:4");
  });
});

describe("sse parser", () => {
  const event = (step: number) =>
    `data: {"app":0,"rank":1,"step":${step},"range":[0,9],"anom":2}\n\n`;

  it("parses complete frames", () => {
    const parser = new SseParser();
    const reports = parser.feed(event(0) + event(1));
    expect(reports.map((r) => r.step)).toEqual([0, 1]);
  });

  it("handles frames split across chunks", () => {
    const parser = new SseParser();
    const whole = event(5);
    expect(parser.feed(whole.slice(0, 20))).toEqual([]);
    const reports = parser.feed(whole.slice(20));
    expect(reports).toHaveLength(1);
    expect(reports[0].step).toBe(5);
  });

  it("drops keepalive comments", () => {
    const parser = new SseParser();
    expect(parser.feed(": keepalive\n\n" + event(2))).toHaveLength(1);
  });
});
