import type { CallstackPayload, CommEdge, SpanDict } from "./types.js";
import { LABEL_ANOMALY, LABEL_NORMAL } from "./types.js";

export interface StackBar {
  row: number; // vertical position: ancestry above, focus, children below
  fid: number;
  fname: string;
  entry: number;
  exit: number;
  /** red for anomalous, black for normal, gray when unknown */
  color: "red" | "black" | "gray";
  isFocus: boolean;
}

export interface CommArrow {
  ts: number;
  kind: string;
  partner: number;
}

export interface CallstackModel {
  t0: number;
  t1: number;
  bars: StackBar[];
  arrows: CommArrow[];
}

function labelColor(label: number | null): StackBar["color"] {
  if (label === LABEL_ANOMALY) return "red";
  if (label === LABEL_NORMAL) return "black";
  return "gray";
}

function descendantDepth(d: SpanDict, all: SpanDict[]): number {
  // nesting depth by strict interval containment among the descendants
  let depth = 0;
  for (const other of all) {
    if (other.span !== d.span && other.entry <= d.entry && other.exit >= d.exit) {
      depth += 1;
    }
  }
  return depth;
}

/**
 * Horizontal-bar call tree over time. Ancestry rows come first (outermost
 * on top), then the focus span, then descendants by nesting depth. Bars
 * entirely outside [t0, t1] are dropped, so zooming to a range that
 * excludes the children leaves the focus bar alone.
 */
export function callstackLayout(
  payload: CallstackPayload,
  t0: number,
  t1: number,
): CallstackModel {
  const bars: StackBar[] = [];
  payload.ancestry.forEach((node, i) => {
    if (node.entry === null || node.exit === null) return;
    if (node.exit < t0 || node.entry > t1) return;
    bars.push({
      row: i,
      fid: node.fid,
      fname: node.fname,
      entry: node.entry,
      exit: node.exit,
      color: labelColor(node.label),
      isFocus: false,
    });
  });
  const focusRow = payload.ancestry.length;
  const f = payload.focus;
  if (f.exit >= t0 && f.entry <= t1) {
    bars.push({
      row: focusRow,
      fid: f.fid,
      fname: f.fname,
      entry: f.entry,
      exit: f.exit,
      color: labelColor(f.label),
      isFocus: true,
    });
  }
  for (const d of payload.descendants) {
    if (d.exit < t0 || d.entry > t1) continue;
    bars.push({
      row: focusRow + 1 + descendantDepth(d, payload.descendants),
      fid: d.fid,
      fname: d.fname,
      entry: d.entry,
      exit: d.exit,
      color: labelColor(d.label),
      isFocus: false,
    });
  }
  const arrows = payload.comm.filter((c: CommEdge) => c.ts >= t0 && c.ts <= t1);
  return { t0, t1, bars, arrows };
}

export function barTooltip(bar: StackBar): string {
  return `${bar.fname} (fid ${bar.fid}) ${bar.entry}..${bar.exit}us`;
}
