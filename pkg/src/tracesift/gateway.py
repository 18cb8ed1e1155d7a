"""Visualization gateway: ingests parameter-server pushes, answers
dashboard queries, and streams live updates to connected clients.

Summary and step data live in memory; span-level views are read from the
provenance store on demand. The live stream is server-sent events carrying
the same push grammar the parameter server emits.
"""

from __future__ import annotations

import asyncio
import json
import math
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.responses import StreamingResponse

from .provenance import ProvenanceStore, span_to_dict

AXES = ("fid", "entry", "exit", "inclusive", "exclusive", "label",
        "n_children", "n_messages")

_AXIS_KEY = {"fid": "fid", "entry": "entry", "exit": "exit",
             "inclusive": "incl", "exclusive": "excl", "label": "label",
             "n_children": "nch", "n_messages": "nmsg"}

RANKING_STATS = ("avg", "std", "max", "min", "total")


class GatewayState:
    def __init__(self, prov_dir=None):
        self.store = ProvenanceStore(prov_dir) if prov_dir else None
        self.version = 0
        self.reports: Dict[Tuple[int, int], Dict[int, dict]] = {}  # (app,rank) -> step -> report
        self.subscribers: Set[asyncio.Queue] = set()

    # --- ingest ----------------------------------------------------------

    def ingest(self, msg: dict) -> dict:
        if msg.get("t") != "viz_push":
            raise ValueError(f"unknown message type {msg.get('t')!r}")
        version = int(msg.get("version", 0))
        if version <= self.version:
            return {"ok": True, "stale": True}
        self.version = version
        fresh = []
        for rep in msg.get("reports", []):
            key = (int(rep["app"]), int(rep["rank"]))
            steps = self.reports.setdefault(key, {})
            step = int(rep["step"])
            if step not in steps:
                steps[step] = rep
                fresh.append(rep)
        for q in list(self.subscribers):
            for rep in fresh:
                q.put_nowait(rep)
        return {"ok": True, "stale": False, "accepted": len(fresh)}

    # --- summaries -------------------------------------------------------

    def rank_summary(self, key: Tuple[int, int]) -> dict:
        counts = [r["anom"] for r in self.reports[key].values()]
        n = len(counts)
        total = sum(counts)
        avg = total / n
        var = sum((c - avg) ** 2 for c in counts) / n
        return {"app": key[0], "rank": key[1], "n_steps": n,
                "avg": avg, "std": math.sqrt(var),
                "max": max(counts), "min": min(counts), "total": total}

    def ranking(self, stat: str, n: int) -> dict:
        if stat not in RANKING_STATS:
            raise ValueError(f"unknown statistic {stat!r}")
        if n < 1:
            raise ValueError("n must be >= 1")
        summaries = [self.rank_summary(k) for k in self.reports]
        top = sorted(summaries, key=lambda s: (-s[stat], s["app"], s["rank"]))[:n]
        bottom = sorted(summaries, key=lambda s: (s[stat], s["app"], s["rank"]))[:n]
        return {"stat": stat, "top": top, "bottom": bottom}

    # --- span-level views ------------------------------------------------

    def _step_spans(self, app: int, rank: int, step: int) -> List[dict]:
        if self.store is None:
            raise HTTPException(503, "no provenance store configured")
        seen = {}
        found_step = False
        for rec in self.store.query(app=app, rank=rank, step=step):
            found_step = True
            for span in [rec.anomaly, *rec.context_before, *rec.context_after]:
                seen[(span.thread, span.span_id)] = span
        if not found_step:
            raise HTTPException(404, f"no stored spans for step {step}")
        return [span_to_dict(s) for _, s in sorted(seen.items())]

    def function_view(self, app: int, rank: int, step: int,
                      x_axis: str, y_axis: str) -> List[dict]:
        if x_axis not in AXES or y_axis not in AXES:
            raise ValueError(f"axes must be in {AXES}")
        xk, yk = _AXIS_KEY[x_axis], _AXIS_KEY[y_axis]
        return [{"x": d[xk], "y": d[yk], "span": d}
                for d in self._step_spans(app, rank, step)]

    def callstack_view(self, app: int, rank: int, t0: int, t1: int,
                       span_id: int, thread: Optional[int] = None) -> dict:
        if self.store is None:
            raise HTTPException(503, "no provenance store configured")
        spans: Dict[Tuple[int, int], dict] = {}
        for rec in self.store.query(app=app, rank=rank):
            for span in [rec.anomaly, *rec.context_before, *rec.context_after]:
                spans[(span.thread, span.span_id)] = span_to_dict(span)
        focus = None
        for (th, sid), d in spans.items():
            if sid == span_id and (thread is None or th == thread):
                focus = d
                break
        if focus is None:
            raise HTTPException(404, f"unknown span {span_id}")

        path = focus.get("path", [])
        ancestry = []
        for fid, name in path[:-1]:
            node = {"fid": fid, "fname": name, "entry": None, "exit": None,
                    "label": None}
            for d in spans.values():
                if (d["fid"] == fid and d["thread"] == focus["thread"]
                        and d["entry"] <= focus["entry"] and d["exit"] >= focus["exit"]):
                    node.update(entry=d["entry"], exit=d["exit"], label=d["label"])
                    break
            ancestry.append(node)

        descendants = [
            d for d in spans.values()
            if d["thread"] == focus["thread"]
            and (d["thread"], d["span"]) != (focus["thread"], focus["span"])
            and d["entry"] >= focus["entry"] and d["exit"] <= focus["exit"]
            and d["exit"] >= t0 and d["entry"] <= t1
        ]
        descendants.sort(key=lambda d: d["entry"])
        comm = [{"ts": c[4], "kind": c[0], "partner": c[1]}
                for c in focus.get("comm", [])]
        return {"focus": focus, "ancestry": ancestry,
                "descendants": descendants, "comm": comm}


def create_app(prov_dir=None, static_dir=None) -> FastAPI:
    app = FastAPI(title="trace anomaly gateway")
    state = GatewayState(prov_dir)
    app.state.gateway = state

    @app.post("/api/ingest")
    async def ingest(request: Request):
        try:
            msg = await request.json()
            return state.ingest(msg)
        except (ValueError, KeyError, TypeError) as exc:
            raise HTTPException(400, f"protocol error: {exc}")

    @app.get("/api/ranking")
    async def ranking(stat: str = "std", n: int = 5):
        try:
            return state.ranking(stat, n)
        except ValueError as exc:
            raise HTTPException(400, str(exc))

    @app.get("/api/steps")
    async def steps(app_id: int = Query(0, alias="app"), rank: int = 0):
        reps = state.reports.get((app_id, rank), {})
        return {"reports": [reps[s] for s in sorted(reps)]}

    @app.get("/api/funcview")
    async def funcview(app_id: int = Query(0, alias="app"), rank: int = 0,
                       step: int = 0, x: str = "entry", y: str = "fid"):
        try:
            return {"points": state.function_view(app_id, rank, step, x, y)}
        except ValueError as exc:
            raise HTTPException(400, str(exc))

    @app.get("/api/callstack")
    async def callstack(app_id: int = Query(0, alias="app"), rank: int = 0,
                        t0: int = 0, t1: int = 2 ** 62, span: int = 0,
                        thread: Optional[int] = None):
        return state.callstack_view(app_id, rank, t0, t1, span, thread)

    @app.get("/stream")
    async def stream(request: Request, ranks: str = ""):
        selection = None
        if ranks:
            selection = set()
            for part in ranks.split(","):
                a, r = part.split(":")
                selection.add((int(a), int(r)))

        queue: asyncio.Queue = asyncio.Queue()

        async def gen():
            # history first, then live tail
            history = []
            for key, steps_d in state.reports.items():
                if selection is None or key in selection:
                    history.extend(steps_d[s] for s in sorted(steps_d))
            state.subscribers.add(queue)
            try:
                for rep in history:
                    yield f"data: {json.dumps(rep, separators=(',', ':'))}\n\n"
                while True:
                    try:
                        rep = await asyncio.wait_for(queue.get(), timeout=1.0)
                    except asyncio.TimeoutError:
                        if await request.is_disconnected():
                            return
                        yield ": keepalive\n\n"
                        continue
                    key = (rep["app"], rep["rank"])
                    if selection is None or key in selection:
                        yield f"data: {json.dumps(rep, separators=(',', ':'))}\n\n"
            finally:
                state.subscribers.discard(queue)

        return StreamingResponse(gen(), media_type="text/event-stream")

    if static_dir and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
