/** Tiny SVG/HTML string builders. Pure functions of the panel models so
 * they are unit-testable without a browser; main.ts assigns the output to
 * innerHTML and attaches event handlers by element id. */

import type { CallstackModel } from "./callstack.js";
import type { FuncScatterModel } from "./funcview.js";
import type { RankingModel } from "./ranking.js";
import type { StepScatterModel } from "./steps.js";

const W = 640;
const H = 220;
const PAD = 30;

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/"/g, "&quot;");
}

function scale(v: number, lo: number, hi: number, outLo: number, outHi: number): number {
  if (hi === lo) return (outLo + outHi) / 2;
  return outLo + ((v - lo) / (hi - lo)) * (outHi - outLo);
}

export function renderRanking(model: RankingModel): string {
  if (model.empty) {
    return `<div class="empty">No anomaly reports yet</div>`;
  }
  const bars = [...model.top, ...model.bottom];
  const maxV = Math.max(...bars.map((b) => b.value), 1e-12);
  const parts: string[] = [`<svg viewBox="0 0 ${W} ${H}">`];
  const bw = (W - 2 * PAD) / bars.length;
  bars.forEach((bar, i) => {
    const h = scale(bar.value, 0, maxV, 0, H - 2 * PAD);
    const x = PAD + i * bw;
    const cls = i < model.top.length ? "top" : "bottom";
    const tip = `rank ${bar.key}: avg ${bar.tooltip.avg.toFixed(2)}, std ${bar.tooltip.std.toFixed(2)}, max ${bar.tooltip.max}, min ${bar.tooltip.min}, total ${bar.tooltip.total}`;
    parts.push(
      `<rect id="bar-${bar.key}" class="${cls}" x="${x}" y="${H - PAD - h}" ` +
        `width="${bw * 0.8}" height="${h}"><title>${esc(tip)}</title></rect>`,
      `<text x="${x + bw * 0.4}" y="${H - PAD + 14}" text-anchor="middle">${bar.rank}</text>`,
    );
  });
  parts.push("</svg>");
  return parts.join("");
}

export function renderStepScatter(model: StepScatterModel): string {
  if (model.dots.length === 0) {
    return `<div class="empty">Select a rank to stream its steps</div>`;
  }
  const xs = model.dots.map((d) => d.x);
  const ys = model.dots.map((d) => d.y);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  const parts = [`<svg viewBox="0 0 ${W} ${H}">`];
  model.dots.forEach((d, i) => {
    const cx = scale(d.x, x0, x1, PAD, W - PAD);
    const cy = scale(d.y, y0, y1, H - PAD, PAD);
    parts.push(
      `<circle id="dot-${i}" cx="${cx}" cy="${cy}" r="4" fill="${d.color}"/>`,
    );
  });
  parts.push("</svg>");
  return parts.join("");
}

export function renderFuncScatter(model: FuncScatterModel): string {
  if (model.dots.length === 0) {
    return `<div class="empty">No stored spans for this step</div>`;
  }
  const xs = model.dots.map((d) => d.x);
  const ys = model.dots.map((d) => d.y);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  const parts = [`<svg viewBox="0 0 ${W} ${H}">`];
  model.dots.forEach((d, i) => {
    const cx = scale(d.x, x0, x1, PAD, W - PAD);
    const cy = scale(d.y, y0, y1, H - PAD, PAD);
    const cls = d.anomalous ? "anomaly" : "normal";
    parts.push(`<circle id="func-${i}" class="${cls}" cx="${cx}" cy="${cy}" r="5"/>`);
  });
  parts.push(
    `<text x="${W / 2}" y="${H - 4}" text-anchor="middle">${model.xAxis}</text>`,
    `<text x="10" y="${H / 2}" transform="rotate(-90 10 ${H / 2})">${model.yAxis}</text>`,
    "</svg>",
  );
  return parts.join("");
}

export function renderCallstack(model: CallstackModel): string {
  if (model.bars.length === 0) {
    return `<div class="empty">Nothing in the selected time range</div>`;
  }
  const rowH = 22;
  const nRows = Math.max(...model.bars.map((b) => b.row)) + 1;
  const height = nRows * rowH + 2 * PAD;
  const parts = [`<svg viewBox="0 0 ${W} ${height}">`];
  for (const bar of model.bars) {
    const x0 = scale(Math.max(bar.entry, model.t0), model.t0, model.t1, PAD, W - PAD);
    const x1 = scale(Math.min(bar.exit, model.t1), model.t0, model.t1, PAD, W - PAD);
    const y = PAD + bar.row * rowH;
    parts.push(
      `<rect class="stackbar${bar.isFocus ? " focus" : ""}" x="${x0}" y="${y}" ` +
        `width="${Math.max(x1 - x0, 1)}" height="${rowH - 6}" fill="none" stroke="${bar.color}"/>`,
      `<text x="${x0 + 3}" y="${y + 12}" fill="${bar.color}">${esc(bar.fname)}</text>`,
    );
  }
  for (const arrow of model.arrows) {
    const x = scale(arrow.ts, model.t0, model.t1, PAD, W - PAD);
    parts.push(
      `<line class="comm" x1="${x}" y1="${PAD}" x2="${x}" y2="${height - PAD}"/>`,
      `<text x="${x + 2}" y="${height - PAD + 12}">${esc(arrow.kind)} r${arrow.partner}</text>`,
    );
  }
  parts.push("</svg>");
  return parts.join("");
}
