import type { Axis, FuncPoint, SpanDict } from "./types.js";
import { AXES, LABEL_ANOMALY } from "./types.js";

export interface FuncDot {
  x: number;
  y: number;
  anomalous: boolean;
  span: SpanDict;
}

export interface FuncScatterModel {
  xAxis: Axis;
  yAxis: Axis;
  dots: FuncDot[];
}

export function isAxis(name: string): name is Axis {
  return (AXES as readonly string[]).includes(name);
}

/** Axis-configurable span scatter. The gateway already projected x/y for
 * the requested axes; anomalies just get flagged for distinct rendering. */
export function funcScatter(points: FuncPoint[], xAxis: Axis, yAxis: Axis): FuncScatterModel {
  return {
    xAxis,
    yAxis,
    dots: points.map((p) => ({
      x: p.x,
      y: p.y,
      anomalous: p.span.label === LABEL_ANOMALY,
      span: p.span,
    })),
  };
}

export function funcTooltip(dot: FuncDot): string {
  const s = dot.span;
  return `${s.fname} (fid ${s.fid}) span ${s.span}: inclusive ${s.incl}us, exclusive ${s.excl}us`;
}
