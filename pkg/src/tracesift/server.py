"""Parameter server: the workflow-global statistics view and its wire protocol.

Workers push per-step deltas; the reply piggybacks the post-merge global
statistics for exactly the functions in the request, so one round trip
both publishes and refreshes. Transport is newline-delimited JSON over a
TCP stream. A background pusher forwards coalesced anomaly step reports
to the visualization gateway.
"""

from __future__ import annotations

import json
import socket
import socketserver
import threading
import time
from typing import Dict, List, Optional, Tuple

from .engine import AnomalyStepReport
from .stats import RunStats, merge_stats


class ProtocolError(RuntimeError):
    pass


class StaleStep(RuntimeError):
    """Duplicate or out-of-order step delivery; merge skipped."""


class GlobalView:
    """Merged per-function statistics plus per-rank step report history.

    Thread safe; the lock is held only for the duration of one merge, so a
    stalled client never blocks other workers (no global barrier).
    """

    def __init__(self):
        self._lock = threading.Lock()
        self.stats: Dict[int, RunStats] = {}
        self.names: Dict[int, str] = {}
        self.reports: Dict[Tuple[int, int], List[dict]] = {}
        self.last_step: Dict[Tuple[int, int], int] = {}
        self.version = 0
        self._unpushed: List[dict] = []

    def handle_update(self, msg: dict) -> dict:
        """Merge one worker update; returns the snapshot reply dict."""
        try:
            app = int(msg["app"])
            rank = int(msg["rank"])
            step = int(msg["step"])
            t0, t1 = msg.get("range", [0, 0])
            n_anom = int(msg.get("anom", 0))
            deltas = msg["stats"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed update: {exc}") from None

        fids = []
        parsed = []
        for fid_s, entry in deltas.items():
            try:
                fid = int(fid_s)
                st = RunStats.from_dict(entry)
            except (TypeError, ValueError, KeyError) as exc:
                raise ProtocolError(f"malformed stats for fid {fid_s!r}: {exc}") from None
            if st.n < 0:
                raise ProtocolError(f"negative count for fid {fid_s!r}")
            fids.append(fid)
            parsed.append((fid, st, entry.get("name")))

        with self._lock:
            key = (app, rank)
            stale = step <= self.last_step.get(key, -1)
            if not stale:
                self.last_step[key] = step
                for fid, st, name in parsed:
                    cur = self.stats.get(fid)
                    self.stats[fid] = st if cur is None else merge_stats(cur, st)
                    if name:
                        self.names[fid] = name
                report = {"app": app, "rank": rank, "step": step,
                          "range": [t0, t1], "anom": n_anom}
                self.reports.setdefault(key, []).append(report)
                self._unpushed.append(report)
                self.version += 1
            reply = {
                "t": "snapshot",
                "version": self.version,
                "stale": stale,
                "stats": {},
            }
            for fid in fids:
                st = self.stats.get(fid)
                if st is not None:
                    d = st.to_dict()
                    if fid in self.names:
                        d["name"] = self.names[fid]
                    reply["stats"][str(fid)] = d
        return reply

    def drain_unpushed(self) -> Tuple[int, List[dict]]:
        with self._lock:
            reports, self._unpushed = self._unpushed, []
            return self.version, reports

    def requeue(self, reports: List[dict]) -> None:
        """Put reports back after a failed viz delivery (at-least-once)."""
        with self._lock:
            self._unpushed = reports + self._unpushed


def make_update_msg(app: int, rank: int, step: int,
                    report: AnomalyStepReport,
                    deltas: Dict[int, RunStats],
                    names: Dict[int, str]) -> dict:
    stats = {}
    for fid, st in deltas.items():
        d = st.to_dict()
        name = names.get(fid)
        if name:
            d["name"] = name
        stats[str(fid)] = d
    return {"t": "update", "app": app, "rank": rank, "step": step,
            "range": [report.t_begin_us, report.t_end_us],
            "anom": report.n_anomalies, "stats": stats}


def parse_snapshot(reply: dict) -> Dict[int, RunStats]:
    return {int(fid): RunStats.from_dict(d) for fid, d in reply.get("stats", {}).items()}


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        view: GlobalView = self.server.view  # type: ignore[attr-defined]
        for raw in self.rfile:
            line = raw.strip()
            if not line:
                continue
            try:
                msg = json.loads(line)
                if msg.get("t") != "update":
                    raise ProtocolError(f"unknown message type {msg.get('t')!r}")
                reply = view.handle_update(msg)
            except (json.JSONDecodeError, ProtocolError) as exc:
                reply = {"t": "err", "code": "protocol", "detail": str(exc)}
            out = json.dumps(reply, separators=(",", ":")) + "\n"
            try:
                self.wfile.write(out.encode())
                self.wfile.flush()
            except (BrokenPipeError, ConnectionResetError):
                return


class ParamServer(socketserver.ThreadingTCPServer):
    """TCP front end over a GlobalView; one thread per client connection."""

    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, listen: Tuple[str, int], viz_addr: Optional[str] = None,
                 push_interval_s: float = 1.0):
        super().__init__(listen, _Handler)
        self.view = GlobalView()
        self.viz_addr = viz_addr
        self.push_interval_s = push_interval_s
        self._last_pushed_version = 0
        self._pusher: Optional[threading.Thread] = None
        self._stop = threading.Event()
        self._started = False

    @property
    def address(self) -> Tuple[str, int]:
        return self.socket.getsockname()

    def start(self) -> None:
        self._started = True
        threading.Thread(target=self.serve_forever, daemon=True).start()
        if self.viz_addr:
            self._pusher = threading.Thread(target=self._push_loop, daemon=True)
            self._pusher.start()

    def stop(self) -> None:
        self._stop.set()
        if self._started:
            self.shutdown()
        self.server_close()

    def _push_loop(self) -> None:
        import httpx

        while not self._stop.wait(self.push_interval_s):
            self.push_once(httpx)
        self.push_once(httpx)  # final flush

    def push_once(self, client_mod=None) -> Optional[dict]:
        """Send one coalesced viz push if the view advanced; returns the
        message sent, or None."""
        version, reports = self.view.drain_unpushed()
        if version <= self._last_pushed_version and not reports:
            return None
        msg = {"t": "viz_push", "version": version, "reports": reports}
        if self.viz_addr:
            if client_mod is None:
                import httpx as client_mod
            try:
                client_mod.post(f"{self.viz_addr}/api/ingest", json=msg, timeout=5.0)
            except Exception:
                self.view.requeue(reports)
                return None
        self._last_pushed_version = version
        return msg


class ParamClient:
    """Blocking line-protocol client used by worker processes."""

    def __init__(self, addr: Tuple[str, int], timeout: float = 30.0):
        self._sock = socket.create_connection(addr, timeout=timeout)
        self._rfile = self._sock.makefile("rb")

    def send_update(self, msg: dict) -> dict:
        data = json.dumps(msg, separators=(",", ":")) + "\n"
        self._sock.sendall(data.encode())
        line = self._rfile.readline()
        if not line:
            raise ProtocolError("server closed connection")
        reply = json.loads(line)
        if reply.get("t") == "err":
            raise ProtocolError(reply.get("detail", "server error"))
        return reply

    def close(self) -> None:
        try:
            self._rfile.close()
        finally:
            self._sock.close()
