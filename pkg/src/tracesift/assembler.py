"""Call-stack reconstruction from ENTRY/EXIT event streams.

Each (app, rank, thread) stream gets its own stack. Communication events
attach to the innermost open function, or to a synthetic per-thread root
(span_id 0) when the stack is empty. Completed spans carry inclusive and
exclusive timings plus child/message counters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import List, Optional, Tuple

from .model import CommPayload, FuncKind, FuncPayload, TraceEvent

SYNTHETIC_ROOT_ID = 0


class Label(IntEnum):
    NORMAL = 0
    ANOMALY = 1
    UNLABELED = 2


class StackMismatch(RuntimeError):
    """EXIT event whose func_id does not match the top of the stack."""

    def __init__(self, expected_fid: int, got_fid: int):
        super().__init__(f"EXIT fid {got_fid} does not match open frame fid {expected_fid}")
        self.expected_fid = expected_fid
        self.got_fid = got_fid


@dataclass(slots=True)
class ExecSpan:
    """One completed function call."""

    span_id: int  # per-(app, rank, thread) entry ordinal, 1-based; 0 = synthetic root
    app_id: int
    rank: int
    thread: int
    func_id: int
    func_name: str
    entry_us: int
    exit_us: int
    inclusive_us: int
    exclusive_us: int
    n_children: int
    n_messages: int
    parent_span: Optional[int]
    comm: List[Tuple[str, int, int, int, int]]  # (kind, partner, tag, bytes, ts)
    label: Label = Label.UNLABELED
    call_path: Tuple[Tuple[int, str], ...] = ()

    @property
    def key(self) -> Tuple[int, int, int, int]:
        return (self.app_id, self.rank, self.thread, self.span_id)


class _Frame:
    __slots__ = ("span_id", "fid", "fname", "entry_us", "child_incl",
                 "n_children", "n_messages", "comm", "parent_span", "path")

    def __init__(self, span_id, fid, fname, entry_us, parent_span, path):
        self.span_id = span_id
        self.fid = fid
        self.fname = fname
        self.entry_us = entry_us
        self.child_incl = 0
        self.n_children = 0
        self.n_messages = 0
        self.comm = []
        self.parent_span = parent_span
        self.path = path


@dataclass
class AssemblerState:
    """Open stacks and counters for one worker's streams."""

    mismatch_policy: str = "discard"  # or "strict"
    stacks: dict = field(default_factory=dict)   # (app, rank, thread) -> [_Frame]
    ordinals: dict = field(default_factory=dict)  # (app, rank, thread) -> next span_id
    root_messages: dict = field(default_factory=dict)  # orphan comm counts per stream
    n_mismatch: int = 0
    n_spans: int = 0


def push_event(state: AssemblerState, e: TraceEvent) -> List[ExecSpan]:
    """Feed one event; returns the spans it completed (0 or 1)."""
    key = (e.app_id, e.rank, e.thread)
    stack = state.stacks.get(key)
    if stack is None:
        stack = state.stacks[key] = []

    p = e.payload
    if type(p) is FuncPayload:
        if p.kind is FuncKind.ENTRY:
            ordinal = state.ordinals.get(key, 1)
            state.ordinals[key] = ordinal + 1
            parent = stack[-1] if stack else None
            path = (parent.path if parent else ()) + ((p.func_id, p.func_name),)
            stack.append(_Frame(ordinal, p.func_id, p.func_name, e.timestamp_us,
                                parent.span_id if parent else None, path))
            return []
        # EXIT
        if not stack or stack[-1].fid != p.func_id:
            expected = stack[-1].fid if stack else -1
            if state.mismatch_policy == "strict":
                raise StackMismatch(expected, p.func_id)
            state.n_mismatch += 1
            return []
        fr = stack.pop()
        incl = e.timestamp_us - fr.entry_us
        span = ExecSpan(
            span_id=fr.span_id,
            app_id=e.app_id, rank=e.rank, thread=e.thread,
            func_id=fr.fid, func_name=fr.fname,
            entry_us=fr.entry_us, exit_us=e.timestamp_us,
            inclusive_us=incl,
            exclusive_us=incl - fr.child_incl,
            n_children=fr.n_children,
            n_messages=fr.n_messages,
            parent_span=fr.parent_span,
            comm=fr.comm,
            call_path=fr.path,
        )
        if stack:
            top = stack[-1]
            top.child_incl += incl
            top.n_children += 1
        state.n_spans += 1
        return [span]

    # communication event
    comm_rec = (p.kind.value, p.partner_rank, p.tag, p.size_bytes, e.timestamp_us)
    if stack:
        top = stack[-1]
        top.n_messages += 1
        top.comm.append(comm_rec)
    else:
        state.root_messages[key] = state.root_messages.get(key, 0) + 1
    return []


def finalize(state: AssemblerState) -> List[ExecSpan]:
    """Drain still-open frames as diagnostic spans (never labeled).

    Innermost frames first within each stream. Timings are entry-only:
    exit/inclusive/exclusive are reported as 0.
    """
    leftovers: List[ExecSpan] = []
    for key in sorted(state.stacks):
        stack = state.stacks[key]
        app, rank, thread = key
        for fr in reversed(stack):
            leftovers.append(ExecSpan(
                span_id=fr.span_id, app_id=app, rank=rank, thread=thread,
                func_id=fr.fid, func_name=fr.fname,
                entry_us=fr.entry_us, exit_us=fr.entry_us,
                inclusive_us=0, exclusive_us=0,
                n_children=fr.n_children, n_messages=fr.n_messages,
                parent_span=fr.parent_span, comm=fr.comm,
                call_path=fr.path,
            ))
        stack.clear()
    return leftovers
