"""Command-line entry point for trace generation, replay, services, and benchmarks."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .engine import ADConfig
from .model import MalformedRecord, OrderingViolation
from .pipeline import (NonPositiveBase, compare_labels, compute_overhead,
                       recall_against_truth, reduction_report, run_offline)
from .provenance import ProvenanceStore
from .server import ParamServer, ProtocolError
from .synth import SynthSpec, generate, load_ground_truth

EXIT_DATA_ERROR = 1
EXIT_PROTOCOL_ERROR = 2


@click.group()
@click.option("--alpha", default=6.0, show_default=True, help="sigma-rule control parameter")
@click.option("--k", "k_context", default=5, show_default=True, help="context window size")
@click.option("--nmin", default=10, show_default=True, help="warm-up sample count")
@click.option("--flush", default=1.0, show_default=True, help="step/push interval in seconds")
@click.option("--seed", default=0, show_default=True, help="RNG seed")
@click.pass_context
def main(ctx, alpha, k_context, nmin, flush, seed):
    ctx.obj = {
        "cfg": ADConfig(alpha=alpha, k_context=k_context, n_min=nmin,
                        flush_interval_s=flush),
        "seed": seed,
    }


@main.command()
@click.argument("out_dir", type=click.Path())
@click.option("--ranks", default=4, show_default=True)
@click.option("--roots", default=1000, show_default=True, help="top-level calls per rank")
@click.option("--rate", default=0.01, show_default=True, help="anomaly injection rate")
@click.option("--multiplier", default=20.0, show_default=True)
@click.pass_context
def synth(ctx, out_dir, ranks, roots, rate, multiplier):
    """Generate a synthetic ground-truth-labeled trace corpus."""
    spec = SynthSpec(n_ranks=ranks, n_roots=roots, anomaly_rate=rate,
                     multiplier=multiplier, seed=ctx.obj["seed"])
    res = generate(spec, out_dir)
    click.echo(json.dumps({
        "traces": len(res.trace_paths), "raw_bytes": res.raw_bytes,
        "injected": res.n_injected, "truth": str(res.truth_path),
    }))


def _parse_mode(mode: str):
    if mode == "central":
        return "central", 1
    if mode.startswith("dist:"):
        return "distributed", int(mode.split(":", 1)[1])
    raise click.BadParameter("mode must be 'central' or 'dist:W'")


@main.command()
@click.argument("trace_dir", type=click.Path(exists=True))
@click.option("--mode", default="central", show_default=True, help="central or dist:W")
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="output directory for labels and provenance")
@click.pass_context
def run(ctx, trace_dir, mode, out_dir):
    """Replay a trace directory through the anomaly-detection pipeline."""
    mode_name, workers = _parse_mode(mode)
    try:
        result = run_offline(trace_dir, ctx.obj["cfg"], mode=mode_name,
                             n_workers=workers, out_dir=out_dir)
    except (MalformedRecord, OrderingViolation) as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(EXIT_DATA_ERROR)
    if out_dir is not None:
        _write_labels(result, Path(out_dir) / "labels.jsonl")
    click.echo(json.dumps({
        "mode": result.mode, "spans": result.n_spans,
        "anomalies": result.n_anomalies, "mismatches": result.n_mismatch,
        "incomplete": result.n_incomplete, "raw_bytes": result.raw_bytes,
        "prov_bytes": result.prov_bytes,
        "wall_s": round(result.wall_seconds, 3),
    }))


def _write_labels(result, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for (app, rank, thread), arr in sorted(result.labels.items()):
            fh.write(json.dumps({
                "type": "LABELS", "app": app, "rank": rank, "thread": thread,
                "labels": "".join(str(b) for b in arr),
            }, separators=(",", ":")) + "\n")


@main.command("serve-ps")
@click.option("--listen", default="127.0.0.1:5555", show_default=True)
@click.option("--viz", default=None, help="gateway base URL for pushes")
@click.option("--push-interval", default=1.0, show_default=True)
def serve_ps(listen, viz, push_interval):
    """Run the parameter server."""
    host, port = listen.rsplit(":", 1)
    try:
        server = ParamServer((host, int(port)), viz_addr=viz,
                             push_interval_s=push_interval)
    except OSError as exc:
        click.echo(f"protocol error: {exc}", err=True)
        sys.exit(EXIT_PROTOCOL_ERROR)
    click.echo(f"parameter server listening on {server.address[0]}:{server.address[1]}")
    server.start()
    try:
        import threading
        threading.Event().wait()
    except KeyboardInterrupt:
        server.stop()


@main.command("serve-viz")
@click.option("--listen", default="127.0.0.1:8080", show_default=True)
@click.option("--prov-dir", type=click.Path(), default=None)
@click.option("--static", "static_dir", type=click.Path(), default=None,
              help="directory with the dashboard build to serve at /")
def serve_viz(listen, prov_dir, static_dir):
    """Run the visualization gateway."""
    import uvicorn

    from .gateway import create_app

    host, port = listen.rsplit(":", 1)
    uvicorn.run(create_app(prov_dir, static_dir), host=host, port=int(port),
                log_level="warning")


@main.command()
@click.argument("prov_dir", type=click.Path(exists=True))
@click.option("--app", "app_id", type=int, default=None)
@click.option("--rank", type=int, default=None)
@click.option("--step", type=int, default=None)
@click.option("--step-range", nargs=2, type=int, default=None)
@click.option("--time-range", nargs=2, type=int, default=None)
@click.option("--fid", type=int, default=None)
def provq(prov_dir, app_id, rank, step, step_range, time_range, fid):
    """Query stored provenance records."""
    store = ProvenanceStore(prov_dir)
    for rec in store.query(app=app_id, rank=rank, step=step,
                           step_range=step_range or None,
                           time_range=time_range or None, func_id=fid):
        click.echo(json.dumps(rec.to_dict(), separators=(",", ":")))


@main.command()
@click.option("--ranks", default=10, show_default=True)
@click.option("--roots", default=500, show_default=True)
@click.option("--workers", default=4, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.pass_context
def bench(ctx, ranks, roots, workers, out_dir):
    """Generate a corpus, run both modes, and report accuracy/reduction."""
    import tempfile

    cfg = ctx.obj["cfg"]
    workdir = Path(out_dir) if out_dir else Path(tempfile.mkdtemp(prefix="tracesift-bench-"))
    trace_dir = workdir / "traces"
    spec = SynthSpec(n_ranks=ranks, n_roots=roots, seed=ctx.obj["seed"])
    synth_res = generate(spec, trace_dir)
    truth = load_ground_truth(synth_res.truth_path)

    central = run_offline(trace_dir, cfg, mode="central",
                          out_dir=workdir / "central")
    dist = run_offline(trace_dir, cfg, mode="distributed", n_workers=workers,
                       out_dir=workdir / "dist")
    accuracy = compare_labels(central.labels, dist.labels)
    recall, fp_rate, counts = recall_against_truth(central.labels, truth)
    report = {
        "ranks": ranks,
        "spans": central.n_spans,
        "raw_bytes": central.raw_bytes,
        "prov_bytes": central.prov_bytes,
        "reduction_factor": round(reduction_report(central.raw_bytes,
                                                   central.prov_bytes), 2)
        if central.prov_bytes else None,
        "central_wall_s": round(central.wall_seconds, 3),
        "dist_wall_s": round(dist.wall_seconds, 3),
        "overhead_pct": round(compute_overhead(central.wall_seconds,
                                               dist.wall_seconds), 2),
        "dist_vs_central_accuracy": round(accuracy, 4),
        "central_recall": round(recall, 4),
        "central_fp_rate": fp_rate,
        "counts": counts,
        "workdir": str(workdir),
    }
    click.echo(json.dumps(report, indent=2))


if __name__ == "__main__":
    main()
