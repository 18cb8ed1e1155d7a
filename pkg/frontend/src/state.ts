import { rankKey } from "./types.js";
import type { Axis, Stat, StepReport } from "./types.js";

/** Sliding window of retained steps per rank; older dots are refetched
 * on demand rather than kept in memory. */
export const STEP_WINDOW = 500;

export interface StepSelection {
  app: number;
  rank: number;
  step: number;
}

export interface FocusSelection {
  app: number;
  rank: number;
  span: number;
  t0: number;
  t1: number;
}

/**
 * Drill-down state for the whole page. Invariant: each level requires the
 * previous selection to exist, and clearing a parent clears every child,
 * so the chain ranking -> steps -> function view -> call stack never
 * dangles.
 */
export class ViewState {
  stat: Stat = "std";
  topN = 5;
  axes: { x: Axis; y: Axis } = { x: "entry", y: "fid" };

  private ranks = new Map<string, { app: number; rank: number }>();
  private steps = new Map<string, StepReport[]>();
  selectedStep: StepSelection | null = null;
  focus: FocusSelection | null = null;

  get selectedRanks(): string[] {
    return Array.from(this.ranks.keys());
  }

  isSelected(app: number, rank: number): boolean {
    return this.ranks.has(rankKey(app, rank));
  }

  selectRank(app: number, rank: number): void {
    const key = rankKey(app, rank);
    if (!this.ranks.has(key)) {
      this.ranks.set(key, { app, rank });
      this.steps.set(key, []);
    }
  }

  deselectRank(app: number, rank: number): void {
    const key = rankKey(app, rank);
    this.ranks.delete(key);
    this.steps.delete(key);
    if (this.selectedStep && rankKey(this.selectedStep.app, this.selectedStep.rank) === key) {
      this.clearStep();
    }
  }

  clearRanks(): void {
    this.ranks.clear();
    this.steps.clear();
    this.clearStep();
  }

  selectStep(app: number, rank: number, step: number): void {
    if (!this.isSelected(app, rank)) {
      throw new Error(`rank ${rankKey(app, rank)} is not selected`);
    }
    this.selectedStep = { app, rank, step };
    this.focus = null;
  }

  clearStep(): void {
    this.selectedStep = null;
    this.focus = null;
  }

  selectFocus(span: number, t0: number, t1: number): void {
    if (!this.selectedStep) {
      throw new Error("no step selected");
    }
    const { app, rank } = this.selectedStep;
    this.focus = { app, rank, span, t0, t1 };
  }

  zoomFocus(t0: number, t1: number): void {
    if (!this.focus) {
      throw new Error("no focus span selected");
    }
    this.focus = { ...this.focus, t0, t1 };
  }

  clearFocus(): void {
    this.focus = null;
  }

  /**
   * Record a step report arriving from the stream (or a history refetch).
   * Returns true if it was new; duplicates by step id are ignored so a
   * reconnect never produces duplicate dots.
   */
  addStepReport(rep: StepReport): boolean {
    const key = rankKey(rep.app, rep.rank);
    const window = this.steps.get(key);
    if (!window) {
      return false; // not a selected rank
    }
    if (window.some((r) => r.step === rep.step)) {
      return false;
    }
    window.push(rep);
    window.sort((a, b) => a.step - b.step);
    if (window.length > STEP_WINDOW) {
      window.splice(0, window.length - STEP_WINDOW);
    }
    return true;
  }

  stepsFor(app: number, rank: number): StepReport[] {
    return this.steps.get(rankKey(app, rank)) ?? [];
  }
}
