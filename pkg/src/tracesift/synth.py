"""Synthetic multi-rank trace generation with ground-truth anomaly labels.

Each rank's thread runs a sequence of top-level calls, each expanding into
a small call tree. Base runtimes are lognormal; injected anomalies stretch
a top-level span's duration by a fixed multiplier (extra exclusive time
after the children), so the ground truth stays exact: no other span's
runtime is affected.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Set, Tuple


@dataclass(frozen=True)
class SynthSpec:
    n_apps: int = 1
    n_ranks: int = 4
    n_threads: int = 1
    n_root_funcs: int = 3
    n_child_funcs: int = 3
    depth: int = 2                 # 1 = flat calls, 2 = roots with children, ...
    children_per_call: int = 2
    base_median_us: float = 500.0  # own-time median of a root call
    sigma_log: float = 0.05        # lognormal shape (log-space std)
    anomaly_rate: float = 0.01     # per top-level call
    multiplier: float = 20.0       # duration inflation for injected anomalies
    short_rate: float = 0.0        # optional short-runtime anomalies on leaves
    shrink: float = 5.0
    comm_rate: float = 0.05        # per call
    n_roots: int = 1000            # top-level calls per (rank, thread)
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.anomaly_rate <= 1.0):
            raise ValueError("anomaly_rate must be in [0, 1]")
        if not (0.0 <= self.short_rate <= 1.0):
            raise ValueError("short_rate must be in [0, 1]")
        if self.multiplier <= 1.0:
            raise ValueError("multiplier must be > 1")
        if self.depth < 1 or self.children_per_call < 0:
            raise ValueError("bad call-tree grammar")

    @property
    def spans_per_root(self) -> int:
        total, level = 0, 1
        for _ in range(self.depth):
            total += level
            level *= self.children_per_call
        return total

    def detectability_bound(self, alpha: float = 6.0) -> float:
        """Minimum multiplier for guaranteed detection: 20 * alpha * CV of
        the clean top-level inclusive-time distribution."""
        # inclusive = sum of independent lognormal pieces, one per span in
        # the tree; variance of lognormal(m, s) is m^2 e^{s^2}(e^{s^2}-1).
        s2 = self.sigma_log ** 2
        scale = math.exp(s2) * (math.exp(s2) - 1.0)
        mean_total, var_total, level, med = 0.0, 0.0, 1, self.base_median_us
        for _ in range(self.depth):
            piece_mean = med * math.exp(s2 / 2)
            mean_total += level * piece_mean
            var_total += level * med * med * scale
            level *= self.children_per_call
            med /= 2.0
        cv = math.sqrt(var_total) / mean_total
        return 20.0 * alpha * cv


def _fname(fid: int) -> str:
    if fid < 100:
        return f"root_f{fid}"
    return f"child_d{fid // 100}_f{fid % 100}"


class _RankGen:
    def __init__(self, spec: SynthSpec, app: int, rank: int, thread: int):
        self.spec = spec
        self.app = app
        self.rank = rank
        self.thread = thread
        self.rng = random.Random(f"{spec.seed}:{app}:{rank}:{thread}")
        self.lines: List[str] = []
        self.truth: List[dict] = []
        self.ordinal = 0
        self.fmap: Dict[int, str] = {}

    def _emit_func(self, kind: str, ts: int, fid: int) -> None:
        name = self.fmap.setdefault(fid, _fname(fid))
        self.lines.append(
            f'{{"type":"{kind}","app":{self.app},"rank":{self.rank},'
            f'"thread":{self.thread},"ts":{ts},"fid":{fid},"fname":"{name}"}}\n')

    def _emit_comm(self, ts: int) -> None:
        rng = self.rng
        kind = "SEND" if rng.random() < 0.5 else "RECV"
        partner = rng.randrange(max(self.spec.n_ranks, 2))
        if partner == self.rank:
            partner = (partner + 1) % max(self.spec.n_ranks, 2)
        self.lines.append(
            f'{{"type":"{kind}","app":{self.app},"rank":{self.rank},'
            f'"thread":{self.thread},"ts":{ts},"partner":{partner},'
            f'"tag":{rng.randrange(100)},"bytes":{rng.randrange(1, 65536)}}}\n')

    def _duration(self, median: float) -> int:
        return max(2, round(self.rng.lognormvariate(math.log(median), self.spec.sigma_log)))

    def _gen_call(self, t: int, level: int) -> int:
        """Emit one call (and its subtree) starting at t; returns exit time."""
        spec = self.spec
        rng = self.rng
        if level == 0:
            fid = 1 + rng.randrange(spec.n_root_funcs)
        else:
            fid = 100 * level + 1 + rng.randrange(spec.n_child_funcs)
        self.ordinal += 1
        ordinal = self.ordinal
        median = spec.base_median_us / (2.0 ** level)
        own = self._duration(median)

        is_short = (level == spec.depth - 1 and spec.short_rate > 0
                    and rng.random() < spec.short_rate)
        if is_short:
            own = max(1, round(own / spec.shrink))

        self._emit_func("ENTRY", t, fid)
        if spec.comm_rate > 0 and rng.random() < spec.comm_rate and own > 2:
            self._emit_comm(t + 1)

        cursor = t + max(1, own // 2)  # first half of own time before children
        if level + 1 < spec.depth:
            for _ in range(spec.children_per_call):
                cursor = self._gen_call(cursor, level + 1)
                cursor += rng.randrange(1, 4)  # gap, counts as own exclusive
        exit_ts = cursor + (own - max(1, own // 2))

        if level == 0 and spec.anomaly_rate > 0 and rng.random() < spec.anomaly_rate:
            base_incl = exit_ts - t
            exit_ts = t + round(spec.multiplier * base_incl)
            self.truth.append({"type": "GT", "app": self.app, "rank": self.rank,
                               "thread": self.thread, "span": ordinal, "fid": fid,
                               "direction": "slow"})
        elif is_short:
            self.truth.append({"type": "GT", "app": self.app, "rank": self.rank,
                               "thread": self.thread, "span": ordinal, "fid": fid,
                               "direction": "fast"})

        self._emit_func("EXIT", exit_ts, fid)
        return exit_ts

    def run(self) -> None:
        t = 10
        for _ in range(self.spec.n_roots):
            t = self._gen_call(t, 0)
            t += self.rng.randrange(2, 8)


@dataclass
class SynthResult:
    trace_paths: List[Path]
    truth_path: Path
    raw_bytes: int
    n_injected: int
    truth: Set[Tuple[int, int, int, int]] = field(default_factory=set)  # (app,rank,thread,ordinal)


def generate(spec: SynthSpec, out_dir) -> SynthResult:
    """Write per-(app, rank) trace files and the ground-truth file."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run_id = f"synth-{spec.seed}"
    paths: List[Path] = []
    truth_all: List[dict] = []
    raw_bytes = 0
    for app in range(spec.n_apps):
        for rank in range(spec.n_ranks):
            gens = [_RankGen(spec, app, rank, th) for th in range(spec.n_threads)]
            for g in gens:
                g.run()
            fmap: Dict[int, str] = {}
            for g in gens:
                fmap.update(g.fmap)
            path = out / f"app{app}_rank{rank}.trace.jsonl"
            with open(path, "w", encoding="utf-8") as fh:
                meta = {"type": "META", "run_id": run_id, "epoch_us": 0,
                        "fmap": {str(k): v for k, v in sorted(fmap.items())}}
                fh.write(json.dumps(meta, separators=(",", ":")) + "\n")
                for g in gens:
                    fh.writelines(g.lines)
                    truth_all.extend(g.truth)
            raw_bytes += path.stat().st_size
            paths.append(path)

    truth_path = out / "ground_truth.jsonl"
    with open(truth_path, "w", encoding="utf-8") as fh:
        for rec in truth_all:
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")

    truth_keys = {(r["app"], r["rank"], r["thread"], r["span"]) for r in truth_all}
    return SynthResult(paths, truth_path, raw_bytes, len(truth_all), truth_keys)


def load_ground_truth(path) -> Set[Tuple[int, int, int, int]]:
    keys = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            d = json.loads(line)
            keys.add((d["app"], d["rank"], d["thread"], d["span"]))
    return keys
