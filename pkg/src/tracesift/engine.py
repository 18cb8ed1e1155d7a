"""Per-rank anomaly detection over completed spans.

Labels each span with a sigma-rule threshold (mean +/- alpha * std of
that function's execution time), maintains per-function streaming
statistics, and reduces the step's spans to anomalies plus a window of
nearby normal calls of the same function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .assembler import ExecSpan, Label
from .stats import RunStats, merged_moments


@dataclass(frozen=True)
class ADConfig:
    alpha: float = 6.0
    k_context: int = 5
    n_min: int = 10           # observations required before labeling
    flush_interval_s: float = 1.0
    use_exclusive: bool = False  # threshold on exclusive instead of inclusive time

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.k_context < 0:
            raise ValueError("k_context must be non-negative")
        if self.n_min < 0:
            raise ValueError("n_min must be non-negative")
        if self.flush_interval_s <= 0:
            raise ValueError("flush_interval_s must be positive")


@dataclass
class AnomalyStepReport:
    app_id: int
    rank: int
    step_id: int
    t_begin_us: int
    t_end_us: int
    n_anomalies: int
    per_function: Dict[int, RunStats] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "app": self.app_id, "rank": self.rank, "step": self.step_id,
            "range": [self.t_begin_us, self.t_end_us],
            "anom": self.n_anomalies,
            "stats": {str(f): s.to_dict() for f, s in self.per_function.items()},
        }


def label_span(runtime_us: float, s: RunStats, cfg: ADConfig) -> Label:
    """Sigma-rule label against the given statistics.

    UNLABELED until n_min observations exist; thresholds are strict
    (a runtime exactly at mean +/- alpha*std is NORMAL).
    """
    if s.n < cfg.n_min:
        return Label.UNLABELED
    band = cfg.alpha * math.sqrt(s.m2 / s.n)
    if runtime_us > s.mean + band or runtime_us < s.mean - band:
        return Label.ANOMALY
    return Label.NORMAL


class AdEngine:
    """Anomaly detector for one (app, rank) worker.

    Local statistics accumulate across steps; `pending` holds the delta
    since the last push so the labeling view (global snapshot + pending)
    never double-counts this worker's own pushed data.
    """

    def __init__(self, cfg: ADConfig):
        self.cfg = cfg
        self.local: Dict[int, RunStats] = {}
        self.pending: Dict[int, RunStats] = {}
        self.names: Dict[int, str] = {}
        self.snapshot: Dict[int, RunStats] = {}

    def set_snapshot(self, snapshot: Dict[int, RunStats]) -> None:
        """Install a global statistics snapshot received from the server."""
        self.snapshot = snapshot

    def take_deltas(self) -> Dict[int, RunStats]:
        """Return and reset the per-function accumulations since last push."""
        out = self.pending
        self.pending = {}
        return out

    def process_step(self, spans: List[ExecSpan], step_id: int,
                     app_id: int = 0, rank: int = 0) -> AnomalyStepReport:
        """Label one flush interval's spans in order and update statistics.

        Each span is labeled against the merged view (global snapshot plus
        local not-yet-pushed delta) before its own runtime is folded in.
        """
        cfg = self.cfg
        alpha = cfg.alpha
        n_min = cfg.n_min
        use_excl = cfg.use_exclusive
        local = self.local
        pending = self.pending
        snapshot = self.snapshot
        n_anomalies = 0
        t_begin = spans[0].entry_us if spans else 0
        t_end = spans[-1].exit_us if spans else 0

        for span in spans:
            fid = span.func_id
            x = float(span.exclusive_us if use_excl else span.inclusive_us)
            pend = pending.get(fid)
            if pend is None:
                pend = pending[fid] = RunStats()
                self.names[fid] = span.func_name
            glob = snapshot.get(fid)
            if glob is None:
                n, mean, m2 = pend.n, pend.mean, pend.m2
            else:
                n, mean, m2 = merged_moments(glob, pend)
            if n < n_min:
                span.label = Label.UNLABELED
            else:
                band = alpha * math.sqrt(m2 / n)
                if x > mean + band or x < mean - band:
                    span.label = Label.ANOMALY
                    n_anomalies += 1
                else:
                    span.label = Label.NORMAL
            pend.push(x)
            loc = local.get(fid)
            if loc is None:
                loc = local[fid] = RunStats()
            loc.push(x)
            if span.exit_us > t_end:
                t_end = span.exit_us

        report = AnomalyStepReport(app_id, rank, step_id, t_begin, t_end, n_anomalies)
        for fid, s in self.local.items():
            report.per_function[fid] = s.copy()
        return report


def select_context(spans: List[ExecSpan], cfg: ADConfig) -> List[ExecSpan]:
    """Reduce one function's labeled spans (entry-time ordered) to the
    anomalies plus up to k_context NORMAL calls on each side of each one."""
    k = cfg.k_context
    keep: Dict[int, ExecSpan] = {}
    anomaly_idx = [i for i, s in enumerate(spans) if s.label is Label.ANOMALY]
    for i in anomaly_idx:
        keep[i] = spans[i]
        taken = 0
        j = i - 1
        while j >= 0 and taken < k:
            if spans[j].label is Label.NORMAL:
                keep[j] = spans[j]
                taken += 1
            j -= 1
        taken = 0
        j = i + 1
        while j < len(spans) and taken < k:
            if spans[j].label is Label.NORMAL:
                keep[j] = spans[j]
                taken += 1
            j += 1
    return [keep[i] for i in sorted(keep)]


def context_windows(spans: List[ExecSpan], cfg: ADConfig
                    ) -> List[Tuple[ExecSpan, List[ExecSpan], List[ExecSpan]]]:
    """Per-anomaly (anomaly, before, after) windows over one function's
    entry-ordered spans; windows contain NORMAL spans only."""
    k = cfg.k_context
    out = []
    for i, s in enumerate(spans):
        if s.label is not Label.ANOMALY:
            continue
        before: List[ExecSpan] = []
        j = i - 1
        while j >= 0 and len(before) < k:
            if spans[j].label is Label.NORMAL:
                before.append(spans[j])
            j -= 1
        before.reverse()
        after: List[ExecSpan] = []
        j = i + 1
        while j < len(spans) and len(after) < k:
            if spans[j].label is Label.NORMAL:
                after.append(spans[j])
            j += 1
        out.append((s, before, after))
    return out
