/** Browser wiring: connects the pure panel models to the DOM and the
 * gateway's HTTP + SSE endpoints. */

import { GatewayClient, GatewayError } from "./api.js";
import { callstackLayout } from "./callstack.js";
import { funcScatter, isAxis } from "./funcview.js";
import { rankingModel } from "./ranking.js";
import {
  renderCallstack,
  renderFuncScatter,
  renderRanking,
  renderStepScatter,
} from "./render.js";
import { ViewState } from "./state.js";
import { clickDot, stepScatter } from "./steps.js";
import type { StepDot } from "./steps.js";
import { STATS } from "./types.js";
import type { FuncPoint, Stat, StepReport } from "./types.js";

const client = new GatewayClient("");
const state = new ViewState();

let stream: EventSource | null = null;
let lastFuncPoints: FuncPoint[] = [];
let lastDots: StepDot[] = [];

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function setBanner(text: string): void {
  el("banner").textContent = text;
}

async function refreshRanking(): Promise<void> {
  try {
    const payload = await client.ranking(state.stat, state.topN);
    setBanner("");
    const model = rankingModel(payload);
    el("ranking").innerHTML = renderRanking(model);
    for (const bar of [...model.top, ...model.bottom]) {
      document.getElementById(`bar-${bar.key}`)?.addEventListener("click", () => {
        state.selectRank(bar.app, bar.rank);
        reconnectStream();
      });
    }
  } catch (err) {
    setBanner("connection lost, retrying...");
    setTimeout(refreshRanking, 2000);
    if (!(err instanceof GatewayError)) throw err;
  }
}

function renderSteps(): void {
  const model = stepScatter(state);
  lastDots = model.dots;
  el("steps").innerHTML = renderStepScatter(model);
  model.dots.forEach((dot, i) => {
    document.getElementById(`dot-${i}`)?.addEventListener("click", () => {
      clickDot(state, dot);
      void refreshFuncView();
    });
  });
}

function reconnectStream(): void {
  stream?.close();
  if (state.selectedRanks.length === 0) {
    renderSteps();
    return;
  }
  // history is replayed by the stream itself; step ids dedup reconnects
  stream = new EventSource(client.streamUrl(state.selectedRanks));
  stream.onmessage = (ev) => {
    const rep = JSON.parse(ev.data) as StepReport;
    if (state.addStepReport(rep)) {
      renderSteps();
    }
  };
  stream.onerror = () => setBanner("stream dropped, reconnecting...");
  renderSteps();
}

async function refreshFuncView(): Promise<void> {
  const sel = state.selectedStep;
  if (!sel) return;
  try {
    lastFuncPoints = await client.funcview(
      sel.app,
      sel.rank,
      sel.step,
      state.axes.x,
      state.axes.y,
    );
  } catch (err) {
    if (err instanceof GatewayError && err.status === 404) {
      setBanner("selected step has no stored spans (stale selection)");
      state.clearStep();
      return;
    }
    throw err;
  }
  const model = funcScatter(lastFuncPoints, state.axes.x, state.axes.y);
  el("funcview").innerHTML = renderFuncScatter(model);
  model.dots.forEach((dot, i) => {
    document.getElementById(`func-${i}`)?.addEventListener("click", () => {
      state.selectFocus(dot.span.span, dot.span.entry, dot.span.exit);
      void refreshCallstack();
    });
  });
}

async function refreshCallstack(): Promise<void> {
  const focus = state.focus;
  if (!focus) return;
  try {
    const payload = await client.callstack(
      focus.app,
      focus.rank,
      focus.span,
      focus.t0,
      focus.t1,
    );
    el("callstack").innerHTML = renderCallstack(
      callstackLayout(payload, focus.t0, focus.t1),
    );
  } catch (err) {
    if (err instanceof GatewayError && err.status === 404) {
      state.clearFocus();
      setBanner("span no longer available, back to function view");
      return;
    }
    throw err;
  }
}

function wireControls(): void {
  const statSel = el("stat") as HTMLSelectElement;
  statSel.innerHTML = STATS.map((s) => `<option>${s}</option>`).join("");
  statSel.value = state.stat;
  statSel.addEventListener("change", () => {
    state.stat = statSel.value as Stat;
    void refreshRanking();
  });
  for (const axis of ["x", "y"] as const) {
    const sel = el(`axis-${axis}`) as HTMLSelectElement;
    sel.addEventListener("change", () => {
      if (isAxis(sel.value)) {
        state.axes = { ...state.axes, [axis]: sel.value };
        void refreshFuncView();
      }
    });
  }
  el("clear").addEventListener("click", () => {
    state.clearRanks();
    reconnectStream();
    el("funcview").innerHTML = "";
    el("callstack").innerHTML = "";
  });
}

wireControls();
void refreshRanking();
setInterval(refreshRanking, 5000);

export { state, lastDots, lastFuncPoints };
