import { describe, expect, it } from "vitest";

import { rankingModel } from "../src/ranking";
import { renderRanking } from "../src/render";
import type { RankSummary, RankingPayload } from "../src/types";

function summary(rank: number, std: number): RankSummary {
  return { app: 0, rank, n_steps: 4, avg: std / 2, std, max: 9, min: 0, total: 12 };
}

const PAYLOAD: RankingPayload = {
  stat: "std",
  top: [summary(9, 5), summary(8, 4), summary(7, 3), summary(6, 2), summary(5, 1)],
  bottom: [summary(0, 0.1), summary(1, 0.2), summary(2, 0.3), summary(3, 0.4), summary(4, 0.5)],
};

describe("ranking panel", () => {
  it("echoes gateway values and order, no recomputation", () => {
    const model = rankingModel(PAYLOAD);
    expect(model.top.map((b) => b.rank)).toEqual([9, 8, 7, 6, 5]);
    expect(model.bottom.map((b) => b.rank)).toEqual([0, 1, 2, 3, 4]);
    expect(model.top.map((b) => b.value)).toEqual([5, 4, 3, 2, 1]);
  });

  it("stat=std with n=5 yields ten bars", () => {
    const model = rankingModel(PAYLOAD);
    expect(model.top.length + model.bottom.length).toBe(10);
    const svg = renderRanking(model);
    expect((svg.match(/<rect /g) ?? []).length).toBe(10);
  });

  it("tooltip carries all five statistics", () => {
    const model = rankingModel(PAYLOAD);
    const tip = model.top[0].tooltip;
    for (const key of ["avg", "std", "max", "min", "total"] as const) {
      expect(tip[key]).toBeDefined();
    }
    expect(renderRanking(model)).toContain("total 12");
  });

  it("renders an empty state before any data arrives", () => {
    const model = rankingModel(null);
    expect(model.empty).toBe(true);
    expect(renderRanking(model)).toContain("No anomaly reports yet");
  });
});
