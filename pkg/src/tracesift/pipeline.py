"""Offline replay pipeline: central and distributed analysis over trace files.

Both modes chunk each rank's spans into steps by entry time (one step per
flush interval of trace time) and drive them in deterministic step-major
order, so repeated runs produce identical outputs. The distributed mode
routes every step through the parameter-server merge/snapshot exchange;
the central mode feeds a single detector that sees every rank's spans.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple

from .assembler import AssemblerState, ExecSpan, Label, finalize, push_event
from .engine import ADConfig, AdEngine, AnomalyStepReport, context_windows
from .model import open_trace_stream
from .provenance import ProvenanceRecord, ProvenanceStore, RunEnvironment
from .server import GlobalView, make_update_msg, parse_snapshot


class UniverseMismatch(ValueError):
    """Label sets cover different span universes."""


class NonPositiveBase(ValueError):
    pass


class _StepReader:
    """Streams one rank's trace file as entry-time step batches.

    A step is emitted once every open frame of the file has closed at a
    timestamp past the step boundary (or at end of file), so batches are
    independent of read granularity.
    """

    def __init__(self, path, step_us: int, mismatch_policy: str = "discard"):
        self.path = path
        self.step_us = step_us
        self.state = AssemblerState(mismatch_policy=mismatch_policy)
        self.stream = open_trace_stream(path)
        self._events = iter(self.stream)
        self._pending: Dict[int, List[ExecSpan]] = {}
        self._safe_before = 0  # steps < this are final
        self._eof = False
        self.max_step = -1
        self.app_rank: Optional[Tuple[int, int]] = None
        self.incomplete_spans: List[ExecSpan] = []

    def _advance(self, target_step: int) -> None:
        while not self._eof and self._safe_before <= target_step:
            ev = next(self._events, None)
            if ev is None:
                self._eof = True
                self.incomplete_spans = finalize(self.state)  # diagnostics only
                break
            if self.app_rank is None:
                self.app_rank = (ev.app_id, ev.rank)
            for sp in push_event(self.state, ev):
                step = sp.entry_us // self.step_us
                self._pending.setdefault(step, []).append(sp)
                if step > self.max_step:
                    self.max_step = step
            if all(not s for s in self.state.stacks.values()):
                # every frame closed: spans entering before this timestamp
                # are all emitted, so earlier step windows are final
                self._safe_before = max(self._safe_before,
                                        ev.timestamp_us // self.step_us)

    def take_step(self, step: int) -> List[ExecSpan]:
        self._advance(step)
        spans = self._pending.pop(step, [])
        spans.sort(key=lambda s: s.entry_us)
        return spans

    @property
    def exhausted(self) -> bool:
        return self._eof and not self._pending


@dataclass
class RunResult:
    mode: str
    labels: Dict[Tuple[int, int, int], bytearray] = field(default_factory=dict)
    reports: List[AnomalyStepReport] = field(default_factory=list)
    n_spans: int = 0
    n_anomalies: int = 0
    n_mismatch: int = 0
    n_incomplete: int = 0
    thread_exclusive: Dict[Tuple[int, int, int], int] = field(default_factory=dict)
    thread_root_inclusive: Dict[Tuple[int, int, int], int] = field(default_factory=dict)
    prov_dir: Optional[Path] = None
    prov_bytes: int = 0
    raw_bytes: int = 0
    wall_seconds: float = 0.0


def _record_labels(result: RunResult, spans: List[ExecSpan]) -> None:
    labels = result.labels
    for sp in spans:
        key = (sp.app_id, sp.rank, sp.thread)
        arr = labels.get(key)
        if arr is None:
            arr = labels[key] = bytearray()
        idx = sp.span_id - 1
        if idx >= len(arr):
            arr.extend(b"\x02" * (idx + 1 - len(arr)))
        arr[idx] = int(sp.label)
        key2 = key
        result.thread_exclusive[key2] = result.thread_exclusive.get(key2, 0) + sp.exclusive_us
        if sp.parent_span is None:
            result.thread_root_inclusive[key2] = \
                result.thread_root_inclusive.get(key2, 0) + sp.inclusive_us
    result.n_spans += len(spans)


def _provenance_for_step(spans: List[ExecSpan], cfg: ADConfig, step_id: int
                         ) -> List[ProvenanceRecord]:
    by_fid: Dict[int, List[ExecSpan]] = {}
    for sp in spans:
        by_fid.setdefault(sp.func_id, []).append(sp)
    records = []
    for fid in sorted(by_fid):
        for anomaly, before, after in context_windows(by_fid[fid], cfg):
            records.append(ProvenanceRecord(
                anomaly=anomaly, context_before=before, context_after=after,
                call_path=list(anomaly.call_path), step_id=step_id,
                app_id=anomaly.app_id, rank=anomaly.rank))
    return records


def _trace_files(trace_dir) -> List[Path]:
    files = sorted(Path(trace_dir).glob("*.trace.jsonl"))
    if not files:
        files = sorted(Path(trace_dir).glob("*.jsonl"))
        files = [f for f in files if "ground_truth" not in f.name and ".idx." not in f.name]
    return files


def run_offline(trace_dir, cfg: ADConfig, mode: str = "central",
                n_workers: int = 1, out_dir=None,
                run_id: str = "offline") -> RunResult:
    """Replay trace files through the detection pipeline.

    mode "central": one detector instance sees all ranks (exact statistics).
    mode "distributed": n_workers workers, each owning a subset of ranks,
    exchange per-step deltas with an in-process parameter-server view in a
    deterministic step-major schedule.
    """
    if mode not in ("central", "distributed"):
        raise ValueError(f"unknown mode {mode!r}")
    t_start = time.perf_counter()
    step_us = max(1, int(round(cfg.flush_interval_s * 1e6)))
    files = _trace_files(trace_dir)
    readers = [_StepReader(p, step_us) for p in files]
    result = RunResult(mode=mode)
    result.raw_bytes = sum(p.stat().st_size for p in files)

    store = None
    if out_dir is not None:
        store = ProvenanceStore(Path(out_dir) / "provenance")
        if store.read_environment() is None:
            store.write_environment(RunEnvironment(
                run_id=run_id, epoch_us=0,
                alpha=cfg.alpha, k_context=cfg.k_context,
                n_min=cfg.n_min, flush_interval_s=cfg.flush_interval_s))

    if mode == "central":
        engine = AdEngine(cfg)
        engines: Dict[int, AdEngine] = {}
        view = None
    else:
        view = GlobalView()
        engines = {i: AdEngine(cfg) for i in range(len(readers))}

    step = 0
    while True:
        for idx, reader in enumerate(readers):
            spans = reader.take_step(step)
            if not spans:
                continue
            app, rank = reader.app_rank or (0, 0)
            if mode == "central":
                report = engine.process_step(spans, step, app, rank)
            else:
                eng = engines[idx]
                report = eng.process_step(spans, step, app, rank)
                msg = make_update_msg(app, rank, step, report,
                                      eng.take_deltas(), eng.names)
                reply = view.handle_update(msg)
                eng.set_snapshot(parse_snapshot(reply))
            result.reports.append(report)
            result.n_anomalies += report.n_anomalies
            _record_labels(result, spans)
            if store is not None:
                records = _provenance_for_step(spans, cfg, step)
                if records:
                    store.write_records(records)
        if all(r.exhausted for r in readers) and \
                all(step > r.max_step for r in readers):
            break
        step += 1

    for reader in readers:
        result.n_mismatch += reader.state.n_mismatch
        result.n_incomplete += len(reader.incomplete_spans)

    if store is not None:
        result.prov_dir = store.root
        result.prov_bytes = store.total_bytes()
    result.wall_seconds = time.perf_counter() - t_start
    return result


def compare_labels(oracle: Dict[Tuple[int, int, int], bytearray],
                   candidate: Dict[Tuple[int, int, int], bytearray]) -> float:
    """Fraction of agreeing binary labels over spans labeled in both runs.

    UNLABELED (warm-up) spans are excluded from the universe symmetrically.
    """
    if set(oracle) != set(candidate):
        raise UniverseMismatch("label sets cover different streams")
    agree = total = 0
    for key, a in oracle.items():
        b = candidate[key]
        if len(a) != len(b):
            raise UniverseMismatch(f"stream {key}: {len(a)} vs {len(b)} spans")
        for la, lb in zip(a, b):
            if la == 2 or lb == 2:
                continue
            total += 1
            if la == lb:
                agree += 1
    return agree / total if total else 1.0


def recall_against_truth(labels: Dict[Tuple[int, int, int], bytearray],
                         truth: Set[Tuple[int, int, int, int]]
                         ) -> Tuple[float, float, dict]:
    """(recall over labeled injected anomalies, false-positive rate over
    labeled clean spans, counts dict)."""
    detected = labeled_truth = 0
    fp = labeled_clean = 0
    truth_by_stream: Dict[Tuple[int, int, int], Set[int]] = {}
    for app, rank, thread, ordinal in truth:
        truth_by_stream.setdefault((app, rank, thread), set()).add(ordinal)
    for key, arr in labels.items():
        injected = truth_by_stream.get(key, set())
        for idx, lab in enumerate(arr):
            if lab == 2:
                continue
            if (idx + 1) in injected:
                labeled_truth += 1
                if lab == 1:
                    detected += 1
            else:
                labeled_clean += 1
                if lab == 1:
                    fp += 1
    recall = detected / labeled_truth if labeled_truth else 1.0
    fp_rate = fp / labeled_clean if labeled_clean else 0.0
    counts = {"detected": detected, "labeled_truth": labeled_truth,
              "false_positives": fp, "labeled_clean": labeled_clean}
    return recall, fp_rate, counts


def compute_overhead(t_base: float, t_instrumented: float) -> float:
    """Instrumentation overhead percentage; positive when the instrumented
    run is slower."""
    if t_base <= 0:
        raise NonPositiveBase(f"baseline time must be positive, got {t_base}")
    return (t_instrumented - t_base) / t_base * 100.0


def reduction_report(raw_bytes: int, reduced_bytes: int) -> float:
    """Data reduction factor (raw over persisted)."""
    if reduced_bytes <= 0:
        raise ValueError("reduced size must be positive")
    return raw_bytes / reduced_bytes
