"""Trace event data model and the newline-delimited record codec.

One event per line, UTF-8 JSON objects. Producers (synthetic generator,
file replay) and consumers (per-rank analysis workers) share this module
so the byte format is defined in exactly one place.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterator, Optional, Union


class FuncKind(str, Enum):
    ENTRY = "ENTRY"
    EXIT = "EXIT"


class CommKind(str, Enum):
    SEND = "SEND"
    RECV = "RECV"


class MalformedRecord(ValueError):
    """A record that cannot be decoded into a valid event."""

    def __init__(self, position: int, reason: str):
        super().__init__(f"record {position}: {reason}")
        self.position = position
        self.reason = reason


class OrderingViolation(ValueError):
    """Timestamp regression within one (app, rank, thread) stream."""

    def __init__(self, stream_key, t_prev: int, t_now: int):
        super().__init__(f"stream {stream_key}: timestamp {t_now} < {t_prev}")
        self.stream_key = stream_key
        self.t_prev = t_prev
        self.t_now = t_now


@dataclass(frozen=True, slots=True)
class FuncPayload:
    func_id: int
    func_name: str
    kind: FuncKind


@dataclass(frozen=True, slots=True)
class CommPayload:
    kind: CommKind
    partner_rank: int
    tag: int
    size_bytes: int


@dataclass(frozen=True, slots=True)
class TraceEvent:
    app_id: int
    rank: int
    thread: int
    timestamp_us: int
    payload: Union[FuncPayload, CommPayload]


@dataclass(frozen=True, slots=True)
class RunMeta:
    """Header record carrying run-level static information."""

    run_id: str
    epoch_us: int
    fmap: dict = field(default_factory=dict)


_FUNC_KINDS = {"ENTRY", "EXIT"}
_COMM_KINDS = {"SEND", "RECV"}


def encode_event(e: TraceEvent) -> str:
    """Serialize one event to its canonical single-line form."""
    p = e.payload
    if isinstance(p, FuncPayload):
        rec = {
            "type": p.kind.value,
            "app": e.app_id,
            "rank": e.rank,
            "thread": e.thread,
            "ts": e.timestamp_us,
            "fid": p.func_id,
            "fname": p.func_name,
        }
    else:
        rec = {
            "type": p.kind.value,
            "app": e.app_id,
            "rank": e.rank,
            "thread": e.thread,
            "ts": e.timestamp_us,
            "partner": p.partner_rank,
            "tag": p.tag,
            "bytes": p.size_bytes,
        }
    return json.dumps(rec, separators=(",", ":")) + "\n"


def encode_meta(m: RunMeta) -> str:
    rec = {"type": "META", "run_id": m.run_id, "epoch_us": m.epoch_us}
    if m.fmap:
        rec["fmap"] = {str(k): v for k, v in m.fmap.items()}
    return json.dumps(rec, separators=(",", ":")) + "\n"


def _require(rec: dict, key: str, position: int):
    try:
        return rec[key]
    except KeyError:
        raise MalformedRecord(position, f"missing field {key!r}") from None


def _require_uint(rec: dict, key: str, position: int) -> int:
    v = _require(rec, key, position)
    if not isinstance(v, int) or isinstance(v, bool) or v < 0:
        raise MalformedRecord(position, f"field {key!r} must be a non-negative integer, got {v!r}")
    return v


def decode_event(line: Union[str, bytes], position: int = 0) -> TraceEvent:
    """Decode one record line; raises MalformedRecord on any defect."""
    if isinstance(line, bytes):
        line = line.decode("utf-8", errors="replace")
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(position, f"not valid JSON: {exc.msg}") from None
    if not isinstance(rec, dict):
        raise MalformedRecord(position, "record is not an object")

    kind = _require(rec, "type", position)
    app = _require_uint(rec, "app", position)
    rank = _require_uint(rec, "rank", position)
    thread = _require_uint(rec, "thread", position)
    ts = _require_uint(rec, "ts", position)

    if kind in _FUNC_KINDS:
        fid = _require_uint(rec, "fid", position)
        fname = _require(rec, "fname", position)
        if not isinstance(fname, str):
            raise MalformedRecord(position, "fname must be a string")
        payload = FuncPayload(fid, fname, FuncKind(kind))
    elif kind in _COMM_KINDS:
        partner = _require_uint(rec, "partner", position)
        tag = _require(rec, "tag", position)
        if not isinstance(tag, int) or isinstance(tag, bool):
            raise MalformedRecord(position, "tag must be an integer")
        size = _require_uint(rec, "bytes", position)
        payload = CommPayload(CommKind(kind), partner, tag, size)
    else:
        raise MalformedRecord(position, f"unknown record type {kind!r}")

    return TraceEvent(app, rank, thread, ts, payload)


def decode_meta(line: Union[str, bytes], position: int = 0) -> RunMeta:
    if isinstance(line, bytes):
        line = line.decode("utf-8", errors="replace")
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(position, f"not valid JSON: {exc.msg}") from None
    if rec.get("type") != "META":
        raise MalformedRecord(position, "not a META record")
    run_id = _require(rec, "run_id", position)
    epoch = _require_uint(rec, "epoch_us", position)
    fmap = {int(k): v for k, v in rec.get("fmap", {}).items()}
    return RunMeta(str(run_id), epoch, fmap)


class TraceStream:
    """Ordered event iterator over one trace source.

    ordering_policy STRICT raises OrderingViolation on a timestamp
    regression within a (app, rank, thread) stream; SKIP drops the
    offending event and counts it in `dropped`.
    """

    def __init__(self, fh: IO[str], ordering_policy: str = "STRICT"):
        if ordering_policy not in ("STRICT", "SKIP"):
            raise ValueError(f"unknown ordering policy {ordering_policy!r}")
        self._fh = fh
        self._policy = ordering_policy
        self._last_ts: dict = {}
        self.meta: Optional[RunMeta] = None
        self.dropped = 0
        self._lineno = 0

    def __iter__(self) -> Iterator[TraceEvent]:
        for line in self._fh:
            self._lineno += 1
            if not line.strip():
                continue
            if '"META"' in line:
                self.meta = decode_meta(line, self._lineno)
                continue
            ev = decode_event(line, self._lineno)
            key = (ev.app_id, ev.rank, ev.thread)
            prev = self._last_ts.get(key)
            if prev is not None and ev.timestamp_us < prev:
                if self._policy == "STRICT":
                    raise OrderingViolation(key, prev, ev.timestamp_us)
                self.dropped += 1
                continue
            self._last_ts[key] = ev.timestamp_us
            yield ev


def open_trace_stream(path, ordering_policy: str = "STRICT") -> TraceStream:
    """Open a trace file for ordered iteration. The caller owns iteration;
    the underlying file is closed when the stream is garbage collected."""
    return TraceStream(open(path, "r", encoding="utf-8"), ordering_policy)
