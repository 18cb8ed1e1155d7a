"""Append-only provenance store for anomalies and their context windows.

One record file per (app, rank) plus a step->offset index, so concurrent
per-rank writers never contend. Records reuse the trace file's JSON-line
grammar.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple

from .assembler import ExecSpan, Label


class DuplicateRun(RuntimeError):
    pass


@dataclass
class RunEnvironment:
    run_id: str
    epoch_us: int
    hosts: List[str] = field(default_factory=list)
    alpha: float = 6.0
    k_context: int = 5
    n_min: int = 10
    flush_interval_s: float = 1.0
    metadata: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "type": "ENV", "run_id": self.run_id, "epoch_us": self.epoch_us,
            "hosts": self.hosts, "alpha": self.alpha, "k": self.k_context,
            "nmin": self.n_min, "flush": self.flush_interval_s,
            "meta": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunEnvironment":
        return cls(d["run_id"], d["epoch_us"], list(d.get("hosts", [])),
                   d.get("alpha", 6.0), d.get("k", 5), d.get("nmin", 10),
                   d.get("flush", 1.0), dict(d.get("meta", {})))


@dataclass
class ProvenanceRecord:
    anomaly: ExecSpan
    context_before: List[ExecSpan]
    context_after: List[ExecSpan]
    call_path: List[Tuple[int, str]]
    step_id: int
    app_id: int
    rank: int

    def to_dict(self) -> dict:
        return {
            "type": "PROV", "app": self.app_id, "rank": self.rank,
            "step": self.step_id,
            "span": span_to_dict(self.anomaly),
            "before": [span_to_dict(s) for s in self.context_before],
            "after": [span_to_dict(s) for s in self.context_after],
            "path": [[fid, name] for fid, name in self.call_path],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProvenanceRecord":
        return cls(
            anomaly=span_from_dict(d["span"], d["app"], d["rank"]),
            context_before=[span_from_dict(s, d["app"], d["rank"]) for s in d["before"]],
            context_after=[span_from_dict(s, d["app"], d["rank"]) for s in d["after"]],
            call_path=[(fid, name) for fid, name in d["path"]],
            step_id=d["step"], app_id=d["app"], rank=d["rank"],
        )


def span_to_dict(s: ExecSpan) -> dict:
    return {
        "span": s.span_id, "thread": s.thread, "fid": s.func_id,
        "fname": s.func_name, "entry": s.entry_us, "exit": s.exit_us,
        "incl": s.inclusive_us, "excl": s.exclusive_us,
        "nch": s.n_children, "nmsg": s.n_messages,
        "parent": s.parent_span, "label": int(s.label),
        "comm": [list(c) for c in s.comm],
        "path": [[fid, name] for fid, name in s.call_path],
    }


def span_from_dict(d: dict, app: int, rank: int) -> ExecSpan:
    return ExecSpan(
        span_id=d["span"], app_id=app, rank=rank, thread=d["thread"],
        func_id=d["fid"], func_name=d["fname"],
        entry_us=d["entry"], exit_us=d["exit"],
        inclusive_us=d["incl"], exclusive_us=d["excl"],
        n_children=d["nch"], n_messages=d["nmsg"],
        parent_span=d.get("parent"),
        comm=[tuple(c) for c in d.get("comm", [])],
        label=Label(d.get("label", 2)),
        call_path=tuple((fid, name) for fid, name in d.get("path", [])),
    )


class ProvenanceStore:
    """File-backed store rooted at one directory."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._seen: Dict[Tuple[int, int], set] = {}

    # --- paths ---------------------------------------------------------

    def _rec_path(self, app: int, rank: int) -> Path:
        return self.root / f"app{app}_rank{rank}.jsonl"

    def _idx_path(self, app: int, rank: int) -> Path:
        return self.root / f"app{app}_rank{rank}.idx.json"

    def _env_path(self) -> Path:
        return self.root / "environment.json"

    def _load_seen(self, app: int, rank: int) -> set:
        key = (app, rank)
        seen = self._seen.get(key)
        if seen is None:
            seen = set()
            path = self._rec_path(app, rank)
            if path.exists():
                with open(path, encoding="utf-8") as fh:
                    for line in fh:
                        d = json.loads(line)
                        seen.add((d["rank"], d["step"], d["span"]["span"],
                                  d["span"]["thread"]))
            self._seen[key] = seen
        return seen

    # --- operations ----------------------------------------------------

    def write_records(self, records: List[ProvenanceRecord]) -> int:
        """Append records, deduplicating on (rank, step, span, thread)."""
        written = 0
        by_sink: Dict[Tuple[int, int], List[ProvenanceRecord]] = {}
        for rec in records:
            by_sink.setdefault((rec.app_id, rec.rank), []).append(rec)
        for (app, rank), recs in by_sink.items():
            seen = self._load_seen(app, rank)
            fresh = []
            for rec in sorted(recs, key=lambda r: r.anomaly.entry_us):
                key = (rec.rank, rec.step_id, rec.anomaly.span_id, rec.anomaly.thread)
                if key in seen:
                    continue
                seen.add(key)
                fresh.append(rec)
            if not fresh:
                continue
            path = self._rec_path(app, rank)
            idx_path = self._idx_path(app, rank)
            index = {}
            if idx_path.exists():
                index = json.load(open(idx_path, encoding="utf-8"))
            with open(path, "a", encoding="utf-8") as fh:
                for rec in fresh:
                    offset = fh.tell()
                    index.setdefault(str(rec.step_id), offset)
                    fh.write(json.dumps(rec.to_dict(), separators=(",", ":")) + "\n")
            tmp = idx_path.with_suffix(".tmp")
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump(index, fh)
            os.replace(tmp, idx_path)
            written += len(fresh)
        return written

    def query(self, app: Optional[int] = None, rank: Optional[int] = None,
              step: Optional[int] = None,
              step_range: Optional[Tuple[int, int]] = None,
              time_range: Optional[Tuple[int, int]] = None,
              func_id: Optional[int] = None) -> Iterator[ProvenanceRecord]:
        """Yield records matching all supplied predicates, entry-time ordered."""
        matches: List[ProvenanceRecord] = []
        for path in sorted(self.root.glob("app*_rank*.jsonl")):
            stem = path.stem  # appA_rankR
            a_s, r_s = stem.split("_")
            a, r = int(a_s[3:]), int(r_s[4:])
            if app is not None and a != app:
                continue
            if rank is not None and r != rank:
                continue
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    d = json.loads(line)
                    if step is not None and d["step"] != step:
                        continue
                    if step_range is not None and not (step_range[0] <= d["step"] <= step_range[1]):
                        continue
                    if time_range is not None:
                        t0, t1 = time_range
                        if d["span"]["exit"] < t0 or d["span"]["entry"] > t1:
                            continue
                    if func_id is not None and d["span"]["fid"] != func_id:
                        continue
                    matches.append(ProvenanceRecord.from_dict(d))
        matches.sort(key=lambda r: (r.anomaly.entry_us, r.app_id, r.rank))
        yield from matches

    def write_environment(self, env: RunEnvironment) -> None:
        path = self._env_path()
        if path.exists():
            existing = json.load(open(path, encoding="utf-8"))
            raise DuplicateRun(f"environment already written for run {existing['run_id']!r}")
        tmp = path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(env.to_dict(), fh)
        os.replace(tmp, path)

    def read_environment(self) -> Optional[RunEnvironment]:
        path = self._env_path()
        if not path.exists():
            return None
        return RunEnvironment.from_dict(json.load(open(path, encoding="utf-8")))

    def total_bytes(self) -> int:
        return sum(p.stat().st_size for p in self.root.glob("app*_rank*.jsonl"))
