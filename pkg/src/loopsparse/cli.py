"""Command-line client for the detection service.

The CLI is a thin client: every subcommand builds a request, sends it to the
service, and prints the summary. By default the service app is driven
in-process (no server needed, same filesystem); pass ``--server URL`` to
target a running instance started with ``loopsparse serve``.

Exit codes: 0 success, 1 runtime failure, 2 usage or missing-input error.
"""

import json
import os
import sys

import click

EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _client(server):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=3600.0)
    from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def _call(server, method, path, payload=None):
    with _client(server) as client:
        resp = client.request(method, path, json=payload)
    if resp.status_code == 404:
        click.echo(f"error: {resp.json().get('detail', 'not found')}", err=True)
        sys.exit(EXIT_USAGE)
    if resp.status_code >= 400:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        click.echo(f"error: {detail}", err=True)
        sys.exit(EXIT_RUNTIME)
    return resp.json()


def _require_path(path):
    if not os.path.exists(path):
        click.echo(f"error: input path does not exist: {path}", err=True)
        sys.exit(EXIT_USAGE)


def _floats(_ctx, _param, value):
    if value is None:
        return None
    try:
        return [float(tok) for tok in value.split(",") if tok.strip()]
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from exc


@click.group()
def main():
    """Sparse-optimization loop-closure detection toolkit."""


@main.command()
@click.option("--input", "input_dir", type=str, default=None, help="Directory of PGM frames.")
@click.option("--descriptors", "descriptor_paths", type=str, multiple=True, help="Descriptor file (csv or lcdf); repeat with --stack to stack.")
@click.option("--rows", type=int, default=8, show_default=True, help="Down-sampled rows for image input.")
@click.option("--cols", type=int, default=6, show_default=True, help="Down-sampled cols for image input.")
@click.option("--stack", is_flag=True, help="Stack multiple descriptor files per frame.")
@click.option("--lambda", "lam", type=float, default=0.5, show_default=True, help="Regularization weight.")
@click.option("--tau", type=float, default=0.99, show_default=True, help="Acceptance threshold.")
@click.option("--tg-seconds", type=float, default=10.0, show_default=True, help="Temporal gate in seconds.")
@click.option("--fps", type=float, default=1.0, show_default=True, help="Source frame rate.")
@click.option("--stride", type=int, default=1, show_default=True, help="Keep every Nth frame.")
@click.option("--consistency/--no-consistency", default=True, show_default=True, help="Temporal-consistency filter.")
@click.option("--joint", is_flag=True, help="Joint contribution over previously accepted loops.")
@click.option("--two-phase", type=int, default=None, help="Freeze the dictionary after N frames (memory/live).")
@click.option("--out", "out_dir", type=str, required=True, help="Archive output directory.")
@click.option("--server", type=str, default=None, help="Remote service URL (default: in-process).")
def detect(input_dir, descriptor_paths, rows, cols, stack, lam, tau, tg_seconds, fps, stride, consistency, joint, two_phase, out_dir, server):
    """Run loop-closure detection over an image or descriptor stream."""
    if (input_dir is None) == (not descriptor_paths):
        raise click.UsageError("provide exactly one of --input or --descriptors")
    if not server:
        if input_dir is not None:
            _require_path(input_dir)
        for path in descriptor_paths:
            _require_path(path)
    payload = {
        "out_dir": out_dir,
        "input_dir": input_dir,
        "descriptor_paths": list(descriptor_paths),
        "stack": stack,
        "rows": rows,
        "cols": cols,
        "lambda": lam,
        "tau": tau,
        "t_g_seconds": tg_seconds,
        "fps": fps,
        "stride": stride,
        "consistency": consistency,
        "joint": joint,
        "two_phase": two_phase,
    }
    data = _call(server, "POST", "/detect", payload)
    click.echo(
        f"processed {data['queries']} queries: {data['emitted']} hypotheses, "
        f"{data['accepted']} accepted; mean solve {data['timing']['mean_ms']:.3f} ms"
    )
    click.echo(f"archive: {data['archive_dir']}")


@main.command()
@click.option("--traces", "archive_dir", type=str, required=True, help="Detection archive directory.")
@click.option("--truth", "truth_path", type=str, required=True, help="Ground-truth CSV (i,j per line).")
@click.option("--taus", callback=_floats, default="0.5,0.6,0.7,0.8,0.9,1.0", show_default=True, help="Comma-separated thresholds to sweep.")
@click.option("--lambdas", callback=_floats, default=None, help="Comma-separated weights to sweep (re-solves).")
@click.option("--nn-thresholds", callback=_floats, default=None, help="Comma-separated 1-distance thresholds for the NN baseline.")
@click.option("--tolerance-frames", type=int, default=5, show_default=True, help="Fuzzy match tolerance.")
@click.option("--out", "out_dir", type=str, required=True, help="Evaluation output directory.")
@click.option("--server", type=str, default=None, help="Remote service URL (default: in-process).")
def eval(archive_dir, truth_path, taus, lambdas, nn_thresholds, tolerance_frames, out_dir, server):
    """Score an archive against ground truth; sweep tau/lambda; NN baseline."""
    if not server:
        _require_path(archive_dir)
        _require_path(truth_path)
    payload = {
        "archive_dir": archive_dir,
        "truth_path": truth_path,
        "out_dir": out_dir,
        "taus": taus,
        "lambdas": lambdas or [],
        "nn_thresholds": nn_thresholds or [],
        "tolerance_frames": tolerance_frames,
    }
    data = _call(server, "POST", "/eval", payload)
    for warning in data["warnings"]:
        click.echo(f"warning: {warning}", err=True)
    for point in data["pr_tau"]:
        click.echo(
            f"tau={point['parameter']:.3g} precision={point['precision']:.4f} "
            f"recall={point['recall']:.4f} (tp={point['tp']} fp={point['fp']} fn={point['fn']})"
        )
    click.echo(f"outputs: {data['out_dir']}")


@main.command()
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--n-frames", type=int, default=200, show_default=True)
@click.option("--n-loops", type=int, default=20, show_default=True)
@click.option("--dim", type=int, default=128, show_default=True)
@click.option("--noise", "noise_level", type=float, default=0.05, show_default=True)
@click.option("--out", "out_dir", type=str, required=True, help="Dataset output directory.")
@click.option("--server", type=str, default=None, help="Remote service URL (default: in-process).")
def synth(seed, n_frames, n_loops, dim, noise_level, out_dir, server):
    """Generate a ground-truthed synthetic descriptor stream."""
    payload = {
        "out_dir": out_dir,
        "seed": seed,
        "n_frames": n_frames,
        "n_loops": n_loops,
        "dim": dim,
        "noise_level": noise_level,
    }
    data = _call(server, "POST", "/synth", payload)
    click.echo(f"features: {data['features_path']}")
    click.echo(f"truth: {data['truth_path']}")


@main.command()
@click.option("--host", type=str, default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the detection service."""
    import uvicorn

    uvicorn.run("loopsparse.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
