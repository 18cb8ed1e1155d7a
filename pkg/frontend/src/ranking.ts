import type { RankSummary, RankingPayload, Stat } from "./types.js";
import { rankKey } from "./types.js";

export interface Bar {
  key: string;
  app: number;
  rank: number;
  value: number;
  /** full summary shown on hover: all five statistics plus step count */
  tooltip: RankSummary;
}

export interface RankingModel {
  stat: Stat;
  empty: boolean;
  top: Bar[];
  bottom: Bar[];
}

function toBar(stat: Stat, s: RankSummary): Bar {
  return {
    key: rankKey(s.app, s.rank),
    app: s.app,
    rank: s.rank,
    value: s[stat],
    tooltip: s,
  };
}

/** Bar-chart model straight from the gateway payload: server order is
 * preserved (top descending, bottom ascending) and values are echoed,
 * never recomputed. */
export function rankingModel(payload: RankingPayload | null): RankingModel {
  if (!payload || (payload.top.length === 0 && payload.bottom.length === 0)) {
    return { stat: payload?.stat ?? "std", empty: true, top: [], bottom: [] };
  }
  return {
    stat: payload.stat,
    empty: false,
    top: payload.top.map((s) => toBar(payload.stat, s)),
    bottom: payload.bottom.map((s) => toBar(payload.stat, s)),
  };
}
