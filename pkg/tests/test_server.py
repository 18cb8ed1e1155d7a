import itertools
import json
import threading
import time

import numpy as np
import pytest

from tracesift.server import (GlobalView, ParamClient, ParamServer,
                              ProtocolError, parse_snapshot)
from tracesift.stats import RunStats


def feed(values):
    s = RunStats()
    for x in values:
        s.push(x)
    return s


def update(app, rank, step, fid_values, anom=0):
    stats = {}
    for fid, values in fid_values.items():
        d = feed(values).to_dict()
        d["name"] = f"f{fid}"
        stats[str(fid)] = d
    return {"t": "update", "app": app, "rank": rank, "step": step,
            "range": [0, 100], "anom": anom, "stats": stats}


def test_first_update_equals_delta():
    view = GlobalView()
    reply = view.handle_update(update(0, 0, 0, {7: [1.0, 2.0, 3.0]}))
    snap = parse_snapshot(reply)
    assert snap[7] == feed([1.0, 2.0, 3.0])
    assert reply["stale"] is False


def test_duplicate_step_is_stale():
    view = GlobalView()
    msg = update(0, 0, 0, {7: [1.0, 2.0]})
    view.handle_update(msg)
    reply = view.handle_update(msg)
    assert reply["stale"] is True
    assert parse_snapshot(reply)[7].n == 2  # snapshot still returned, unchanged


def test_reply_covers_exactly_requested_fids():
    view = GlobalView()
    view.handle_update(update(0, 0, 0, {1: [5.0], 2: [6.0]}))
    reply = view.handle_update(update(0, 1, 0, {2: [7.0]}))
    assert set(reply["stats"]) == {"2"}


def test_rank_order_independence():
    values = {0: [1.0, 5.0, 9.0], 1: [2.0, 4.0], 2: [100.0, 3.0, 8.0]}
    finals = []
    for perm in itertools.permutations(values):
        view = GlobalView()
        for rank in perm:
            view.handle_update(update(0, rank, 0, {7: values[rank]}))
        finals.append(view.stats[7])
    ref = finals[0]
    everything = [x for v in values.values() for x in v]
    batch = feed(everything)
    for s in finals:
        assert s.n == batch.n
        assert s.mean == pytest.approx(batch.mean, rel=1e-9)
        assert s.m2 == pytest.approx(batch.m2, rel=1e-9)
        assert (s.min, s.max) == (batch.min, batch.max)
    # oracle: brute-force over the concatenation
    a = np.asarray(everything)
    assert ref.mean == pytest.approx(a.mean(), rel=1e-9)
    assert ref.m2 == pytest.approx(((a - a.mean()) ** 2).sum(), rel=1e-9)


def test_malformed_update_raises_protocol_error():
    view = GlobalView()
    with pytest.raises(ProtocolError):
        view.handle_update({"t": "update", "app": 0})
    with pytest.raises(ProtocolError):
        view.handle_update(update(0, 0, 0, {"bad": [1.0]}) | {"stats": {"x": {"n": "?"}}})


def test_version_advances_per_applied_update():
    view = GlobalView()
    assert view.version == 0
    view.handle_update(update(0, 0, 0, {1: [1.0]}))
    view.handle_update(update(0, 0, 0, {1: [1.0]}))  # stale
    view.handle_update(update(0, 0, 1, {1: [2.0]}))
    assert view.version == 2


class _Sink:
    """Stand-in for the HTTP client module used by the pusher."""

    def __init__(self, fail=0):
        self.posts = []
        self.fail = fail

    def post(self, url, json=None, timeout=None):
        if self.fail > 0:
            self.fail -= 1
            raise ConnectionError("viz unreachable")
        self.posts.append((url, json))


@pytest.fixture
def server():
    srv = ParamServer(("127.0.0.1", 0))
    srv.start()
    yield srv
    srv.stop()


def test_push_no_updates_no_message(server):
    assert server.push_once() is None


def test_push_contains_new_report(server):
    server.view.handle_update(update(0, 3, 0, {1: [1.0]}, anom=4))
    msg = server.push_once()
    assert msg["t"] == "viz_push"
    assert len(msg["reports"]) == 1
    assert msg["reports"][0]["anom"] == 4
    assert server.push_once() is None  # nothing new


def test_push_coalesces_after_failures():
    srv = ParamServer(("127.0.0.1", 0), viz_addr="http://viz.invalid")
    sink = _Sink(fail=3)
    try:
        for step in range(3):
            srv.view.handle_update(update(0, 0, step, {1: [1.0]}))
            srv.push_once(sink)  # delivery fails, reports retained
        assert sink.posts == []
        srv.view.handle_update(update(0, 0, 3, {1: [1.0]}))
        srv.push_once(sink)
        assert len(sink.posts) == 1
        url, msg = sink.posts[0]
        assert msg["version"] == 4  # latest version, all reports coalesced
        assert len(msg["reports"]) == 4
    finally:
        srv.stop()


def test_tcp_round_trip(server):
    client = ParamClient(server.address)
    try:
        reply = client.send_update(update(0, 0, 0, {7: [1.0, 2.0, 3.0]}))
        snap = parse_snapshot(reply)
        assert snap[7].n == 3
        assert snap[7].mean == pytest.approx(2.0)
    finally:
        client.close()


def test_tcp_protocol_error_reply(server):
    client = ParamClient(server.address)
    try:
        with pytest.raises(ProtocolError):
            client.send_update({"t": "bogus"})
        # connection still usable afterwards
        reply = client.send_update(update(0, 0, 0, {1: [1.0]}))
        assert reply["t"] == "snapshot"
    finally:
        client.close()


def test_concurrent_clients_merge_to_batch_oracle(server):
    rng = np.random.default_rng(1)
    per_rank = {r: rng.uniform(0, 1000, size=200).tolist() for r in range(6)}

    def worker(rank):
        client = ParamClient(server.address)
        values = per_rank[rank]
        for step in range(4):
            chunk = values[step * 50:(step + 1) * 50]
            client.send_update(update(0, rank, step, {9: chunk}))
        client.close()

    threads = [threading.Thread(target=worker, args=(r,)) for r in per_rank]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    everything = np.concatenate([np.asarray(v) for v in per_rank.values()])
    merged = server.view.stats[9]
    assert merged.n == everything.size
    assert merged.mean == pytest.approx(everything.mean(), rel=1e-9)
    assert merged.m2 == pytest.approx(
        ((everything - everything.mean()) ** 2).sum(), rel=1e-9)


def test_slow_worker_does_not_block_others(server):
    """One stalled client; the rest keep merging (no global barrier)."""
    done = []

    def fast(rank):
        client = ParamClient(server.address)
        for step in range(10):
            client.send_update(update(0, rank, step, {1: [1.0]}))
        client.close()
        done.append(rank)

    stalled = ParamClient(server.address)
    stalled.send_update(update(0, 99, 0, {1: [1.0]}))
    # stalled client simply stops sending; fast workers proceed
    t0 = time.monotonic()
    threads = [threading.Thread(target=fast, args=(r,)) for r in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join(timeout=5)
    assert sorted(done) == [0, 1, 2, 3]
    assert time.monotonic() - t0 < 5
    stalled.close()
