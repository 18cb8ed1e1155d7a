"""Distributed in-situ performance-trace anomaly analysis toolkit."""

from .assembler import ExecSpan, Label, StackMismatch
from .engine import ADConfig, AnomalyStepReport, label_span, select_context
from .model import (CommPayload, FuncPayload, MalformedRecord,
                    OrderingViolation, TraceEvent, decode_event, encode_event,
                    open_trace_stream)
from .stats import RunStats, merge_stats, update_stats

__all__ = [
    "ADConfig", "AnomalyStepReport", "CommPayload", "ExecSpan", "FuncPayload",
    "Label", "MalformedRecord", "OrderingViolation", "RunStats",
    "StackMismatch", "TraceEvent", "decode_event", "encode_event",
    "label_span", "merge_stats", "open_trace_stream", "select_context",
    "update_stats",
]

__version__ = "0.1.0"
