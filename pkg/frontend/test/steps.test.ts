import { describe, expect, it } from "vitest";

import { renderStepScatter } from "../src/render";
import { ViewState } from "../src/state";
import { clickDot, dotTooltip, stepScatter } from "../src/steps";
import type { StepReport } from "../src/types";

function report(rank: number, step: number, anom = 1): StepReport {
  return { app: 0, rank, step, range: [0, 999], anom };
}

describe("step scatter", () => {
  it("gives every selected rank its own color", () => {
    const s = new ViewState();
    s.selectRank(0, 1);
    s.selectRank(0, 2);
    s.addStepReport(report(1, 0));
    s.addStepReport(report(2, 0));
    const model = stepScatter(s);
    const colors = new Set(model.dots.map((d) => d.color));
    expect(colors.size).toBe(2);
    expect(model.legend.get("0:1")).not.toBe(model.legend.get("0:2"));
  });

  it("one dot per step per rank", () => {
    const s = new ViewState();
    s.selectRank(0, 1);
    for (const step of [0, 1, 2]) s.addStepReport(report(1, step));
    s.addStepReport(report(1, 1)); // reconnect duplicate
    expect(stepScatter(s).dots).toHaveLength(3);
  });

  it("clicking a dot selects its step", () => {
    const s = new ViewState();
    s.selectRank(0, 1);
    s.addStepReport(report(1, 7, 3));
    clickDot(s, stepScatter(s).dots[0]);
    expect(s.selectedStep).toEqual({ app: 0, rank: 1, step: 7 });
  });

  it("tooltip shows count, step id, and time range", () => {
    const s = new ViewState();
    s.selectRank(0, 1);
    s.addStepReport(report(1, 7, 3));
    const tip = dotTooltip(stepScatter(s).dots[0]);
    expect(tip).toContain("step 7");
    expect(tip).toContain("3 anomalies");
    expect(tip).toContain("0..999");
  });

  it("renders an empty state with no selection", () => {
    expect(renderStepScatter(stepScatter(new ViewState()))).toContain("Select a rank");
  });
});
