/** Payload shapes served by the gateway API. The dashboard renders these
 * verbatim; it never recomputes statistics client-side. */

export const STATS = ["avg", "std", "max", "min", "total"] as const;
export type Stat = (typeof STATS)[number];

export const AXES = [
  "fid",
  "entry",
  "exit",
  "inclusive",
  "exclusive",
  "label",
  "n_children",
  "n_messages",
] as const;
export type Axis = (typeof AXES)[number];

export interface StepReport {
  app: number;
  rank: number;
  step: number;
  range: [number, number];
  anom: number;
}

export interface RankSummary {
  app: number;
  rank: number;
  n_steps: number;
  avg: number;
  std: number;
  max: number;
  min: number;
  total: number;
}

export interface RankingPayload {
  stat: Stat;
  top: RankSummary[];
  bottom: RankSummary[];
}

/** [kind, partner, tag, bytes, ts] */
export type CommTuple = [string, number, number, number, number];

export interface SpanDict {
  span: number;
  thread: number;
  fid: number;
  fname: string;
  entry: number;
  exit: number;
  incl: number;
  excl: number;
  nch: number;
  nmsg: number;
  parent: number | null;
  label: number;
  comm: CommTuple[];
  path: [number, string][];
}

export interface FuncPoint {
  x: number;
  y: number;
  span: SpanDict;
}

export interface AncestryNode {
  fid: number;
  fname: string;
  entry: number | null;
  exit: number | null;
  label: number | null;
}

export interface CommEdge {
  ts: number;
  kind: string;
  partner: number;
}

export interface CallstackPayload {
  focus: SpanDict;
  ancestry: AncestryNode[];
  descendants: SpanDict[];
  comm: CommEdge[];
}

export const LABEL_NORMAL = 0;
export const LABEL_ANOMALY = 1;
export const LABEL_UNLABELED = 2;

export function rankKey(app: number, rank: number): string {
  return `${app}:${rank}`;
}
