"""Command-line client for the harness service.

All verbs talk to the service API: in-process by default, or to a running
server via --server. Exit codes: 0 success, 2 configuration error,
3 partial session failures, 4 remote-protocol failure, 1 anything else.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import httpx

from gameaudit.client import ServiceClient

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_PARTIAL = 3
EXIT_REMOTE = 4


def _emit(data) -> None:
    click.echo(json.dumps(data, indent=2, sort_keys=True))


def _call(server, method, path, payload=None):
    try:
        return ServiceClient(server).request(method, path, payload)
    except httpx.HTTPError as exc:
        click.echo(f"cannot reach service: {exc}", err=True)
        sys.exit(EXIT_ERROR)


def _exit_for(status_code: int) -> int:
    if status_code in (400, 422):
        return EXIT_CONFIG
    if status_code >= 500:
        return EXIT_ERROR
    return EXIT_OK


def _load_config(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        click.echo(f"cannot read config {path}: {exc}", err=True)
        sys.exit(EXIT_CONFIG)


server_option = click.option("--server", default=None, help="Service URL; in-process when omitted.")


@click.group()
def main() -> None:
    """Behavioral-audit harness for repeated economic games."""


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host: str, port: int) -> None:
    """Run the HTTP service."""
    import uvicorn

    from gameaudit.service import create_app

    uvicorn.run(create_app(), host=host, port=port)


@main.command("validate-config")
@click.option("-c", "--config", "config_path", required=True, type=click.Path())
@server_option
def validate_config(config_path: str, server: str | None) -> None:
    """Check an experiment config file and print its hash."""
    status, data = _call(server, "POST", "/config/validate", _load_config(config_path))
    _emit(data)
    sys.exit(_exit_for(status))


def _run(config_path: str, server: str | None, resume: bool) -> None:
    payload = {"config": _load_config(config_path), "resume": resume}
    status, data = _call(server, "POST", "/experiments/run", payload)
    _emit(data)
    if status != 200:
        sys.exit(_exit_for(status))
    run_status = data.get("status")
    if run_status == "partial_failures":
        sys.exit(EXIT_PARTIAL)
    if run_status == "remote_protocol_failure":
        sys.exit(EXIT_REMOTE)
    sys.exit(EXIT_OK)


@main.command()
@click.option("-c", "--config", "config_path", required=True, type=click.Path())
@click.option("--resume", is_flag=True, help="Continue an interrupted run.")
@server_option
def run(config_path: str, resume: bool, server: str | None) -> None:
    """Execute every planned session of an experiment."""
    _run(config_path, server, resume)


@main.command()
@click.option("-c", "--config", "config_path", required=True, type=click.Path())
@server_option
def resume(config_path: str, server: str | None) -> None:
    """Resume an interrupted run (alias for run --resume)."""
    _run(config_path, server, True)


@main.command()
@click.option("--run-dir", "run_dirs", multiple=True, required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--human-traces", default=None, type=click.Path())
@click.option("--window", nargs=2, type=int, default=None, help="Inclusive round window for metrics.")
@click.option("--ks-window", nargs=2, type=int, default=None, help="Round window for pairwise distances.")
@click.option("--bin-width", type=int, default=None, help="Entropy bin width (default: exact values).")
@click.option("--ci-method", type=click.Choice(["normal", "bootstrap"]), default="normal", show_default=True)
@server_option
def analyze(run_dirs, out_dir, human_traces, window, ks_window, bin_width, ci_method, server) -> None:
    """Compute metric reports and plot-data files from completed runs."""
    payload = {
        "run_dirs": list(run_dirs),
        "out_dir": out_dir,
        "human_traces_dir": human_traces,
        "window": list(window) if window else None,
        "ks_window": list(ks_window) if ks_window else None,
        "entropy_bin_width": bin_width,
        "ci_method": ci_method,
    }
    status, data = _call(server, "POST", "/analysis/run", payload)
    _emit(data)
    sys.exit(_exit_for(status))


@main.command("gen-humans")
@click.option("--task", type=click.Choice(["auction", "newsvendor"]), default="auction", show_default=True)
@click.option("--n", default=40, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--rounds", type=int, default=None)
@click.option("--distribution", type=click.Choice(["cube_root", "cube", "split"]), default="split", show_default=True)
@server_option
def gen_humans(task, n, seed, out_dir, rounds, distribution, server) -> None:
    """Write synthetic stand-in human traces (clearly labeled as such)."""
    payload = {
        "task": task,
        "n": n,
        "seed": seed,
        "out_dir": out_dir,
        "rounds": rounds,
        "distribution": distribution,
    }
    status, data = _call(server, "POST", "/humans/generate", payload)
    _emit(data)
    sys.exit(_exit_for(status))


@main.command("lint-templates")
@server_option
def lint_templates(server) -> None:
    """Verify that every prompt template carries its expected placeholders."""
    status, data = _call(server, "POST", "/templates/lint", {})
    _emit(data)
    if status == 200 and not data.get("ok", False):
        sys.exit(EXIT_CONFIG)
    sys.exit(_exit_for(status))


@main.command()
@click.option("--task", type=click.Choice(["auction", "newsvendor"]), required=True)
@click.option("--distribution", type=click.Choice(["cube_root", "cube"]), default="cube_root", show_default=True)
@click.option("--samples", default=200_000, show_default=True)
@click.option("--grid-step", default=1, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--pair", "pairs", multiple=True, help="newsvendor price:cost pair, e.g. 10:4 (repeatable)")
@server_option
def oracle(task, distribution, samples, grid_step, seed, pairs, server) -> None:
    """Print the normative-strategy tables used by theory-guided analysis."""
    if task == "auction":
        payload = {
            "distribution": distribution,
            "num_samples": samples,
            "grid_step": grid_step,
            "seed": seed,
        }
        status, data = _call(server, "POST", "/oracle/auction", payload)
        if status != 200:
            _emit(data)
            sys.exit(_exit_for(status))
        click.echo(f"distribution: {data['distribution']}")
        click.echo(f"optimal reserve: {data['r_star']}")
        click.echo("reserve  expected_profit")
        for r, profit in data["curve"]:
            click.echo(f"{r:>7d}  {profit:.4f}")
    else:
        if not pairs:
            click.echo("newsvendor oracle needs at least one --pair price:cost", err=True)
            sys.exit(EXIT_CONFIG)
        parsed = []
        for p in pairs:
            try:
                price, cost = (float(x) for x in p.split(":"))
            except ValueError:
                click.echo(f"bad --pair {p!r}; expected price:cost", err=True)
                sys.exit(EXIT_CONFIG)
            parsed.append((price, cost))
        status, data = _call(server, "POST", "/oracle/newsvendor", {"pairs": parsed})
        if status != 200:
            _emit(data)
            sys.exit(_exit_for(status))
        click.echo("price  cost  optimal_order")
        for row in data["rows"]:
            click.echo(f"{row['price']:>5g}  {row['cost']:>4g}  {row['q_star']:>13d}")
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
