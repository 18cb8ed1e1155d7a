import type { ViewState } from "./state.js";
import type { StepReport } from "./types.js";
import { rankKey } from "./types.js";

const PALETTE = [
  "#1f77b4",
  "#ff7f0e",
  "#2ca02c",
  "#d62728",
  "#9467bd",
  "#8c564b",
  "#e377c2",
  "#17becf",
];

export interface StepDot {
  x: number; // step id
  y: number; // anomaly count
  app: number;
  rank: number;
  color: string;
  report: StepReport;
}

export interface StepScatterModel {
  dots: StepDot[];
  /** rank key -> color, stable in selection order */
  legend: Map<string, string>;
}

/** Live dot plot model: one dot per step per selected rank, colored by
 * rank. Dots come straight from stored reports, so re-rendering after a
 * reconnect is idempotent. */
export function stepScatter(state: ViewState): StepScatterModel {
  const legend = new Map<string, string>();
  const dots: StepDot[] = [];
  state.selectedRanks.forEach((key, i) => {
    const color = PALETTE[i % PALETTE.length];
    legend.set(key, color);
    const [app, rank] = key.split(":").map(Number);
    for (const rep of state.stepsFor(app, rank)) {
      dots.push({ x: rep.step, y: rep.anom, app, rank, color, report: rep });
    }
  });
  return { dots, legend };
}

/** Click handler model: a dot click selects its step and opens the
 * function view for that (rank, step). */
export function clickDot(state: ViewState, dot: StepDot): void {
  state.selectStep(dot.app, dot.rank, dot.x);
}

export function dotTooltip(dot: StepDot): string {
  const [t0, t1] = dot.report.range;
  return `${rankKey(dot.app, dot.rank)} step ${dot.x}: ${dot.y} anomalies, ${t0}..${t1}us`;
}
