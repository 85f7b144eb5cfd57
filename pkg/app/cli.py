"""Command-line entry point: planning, timing simulation, traces, training runs and sweeps."""

import json
import logging
from functools import wraps

import click
import numpy as np

from app.core.config import settings

logger = logging.getLogger(__name__)


def _echo_json(payload) -> None:
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


def _domain_errors(func):
    """Turn domain ValueErrors into a clean exit 1"""

    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ValueError as e:
            raise click.ClickException(str(e)) from e

    return wrapper


@click.group()
@click.option("--log-level", default=settings.log_level, show_default=True, help="Python logging level")
def main(log_level: str):
    """Delayed, compressed distributed SGD simulator with the DeCo planner."""
    logging.basicConfig(level=log_level.upper(), format=settings.log_format)


@main.command()
@click.option("--sg", "s_g", type=float, required=True, help="Gradient size S_g in bits")
@click.option("--a", "a", type=float, required=True, help="Bandwidth in bits/s")
@click.option("--b", "b", type=float, required=True, help="Latency in seconds")
@click.option("--tcomp", "t_comp", type=float, required=True, help="Compute time per iteration in seconds")
@click.option(
    "--regime",
    type=click.Choice(["standard", "high-heterogeneity"]),
    default="standard",
    show_default=True,
    help="Minimize φ (standard) or φ' (high-heterogeneity)",
)
@click.option("--d", "d", type=click.IntRange(min=1), default=None, help="Model dimension for δ_floor = 1/d")
@_domain_errors
def plan(s_g: float, a: float, b: float, t_comp: float, regime: str, d):
    """Print the DeCo (τ, δ) plan as JSON."""
    from app.services.planner import ConvergenceRegime, deco_plan, describe_plan
    from app.services.timing import TimingParams

    result = deco_plan(s_g, a, b, t_comp, regime=ConvergenceRegime(regime), d=d)
    _echo_json(describe_plan(TimingParams(t_comp=t_comp, s_g=s_g, a=a, b=b), result))


@main.command("sim-timing")
@click.option("--tcomp", "t_comp", type=float, required=True, help="Compute time per iteration in seconds")
@click.option("--sg", "s_g", type=float, required=True, help="Gradient size S_g in bits")
@click.option("--a", "a", type=float, required=True, help="Bandwidth in bits/s")
@click.option("--b", "b", type=float, required=True, help="Latency in seconds")
@click.option("--delta", type=float, required=True, help="Compression ratio δ")
@click.option("--tau", type=click.IntRange(min=0), required=True, help="Staleness τ")
@click.option("--t", "t", type=int, required=True, help="Iterations to simulate (>= 1)")
@click.option("--output-dir", default=None, help="Where to write the schedule CSV and summary JSON")
@_domain_errors
def sim_timing(t_comp, s_g, a, b, delta, tau, t, output_dir):
    """Simulate the pipeline and compare it with the closed form."""
    from app.services.report_service import ReportService
    from app.services.timing import TimingParams, simulate_pipeline, summarize_schedule

    p = TimingParams(t_comp=t_comp, s_g=s_g, a=a, b=b)
    schedule = simulate_pipeline(p, delta, tau, t)
    summary = summarize_schedule(schedule, p, delta, tau)
    params = {**p.to_dict(), "delta": delta, "tau": tau, "t": t}
    paths = ReportService(output_dir).export_schedule(schedule, summary, params)
    _echo_json({**summary, **paths})


@main.command()
@click.option("--sg", "s_g", type=float, required=True, help="Gradient size S_g in bits")
@click.option("--tcomp", "t_comp", type=float, required=True, help="Compute time per iteration in seconds")
@click.option("--delta", type=float, default=1.0, show_default=True)
@click.option("--tau", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--bandwidth-range", nargs=2, type=float, default=(1e7, 1e10), show_default=True, help="bits/s, log-spaced")
@click.option("--latency-range", nargs=2, type=float, default=(0.0, 1.0), show_default=True, help="seconds, linear")
@click.option("--points", type=click.IntRange(min=2), default=20, show_default=True)
@click.option("--output-dir", default=None)
@_domain_errors
def heatmap(s_g, t_comp, delta, tau, bandwidth_range, latency_range, points, output_dir):
    """Throughput efficiency over a bandwidth x latency grid (tidy CSV)."""
    from app.services.report_service import ReportService
    from app.services.timing import efficiency_grid

    bandwidths = np.logspace(np.log10(bandwidth_range[0]), np.log10(bandwidth_range[1]), points)
    latencies = np.linspace(latency_range[0], latency_range[1], points)
    frame = efficiency_grid(t_comp, s_g, bandwidths, latencies, delta, tau)
    params = {
        "t_comp": t_comp,
        "s_g": s_g,
        "delta": delta,
        "tau": tau,
        "bandwidth_range": list(bandwidth_range),
        "latency_range": list(latency_range),
        "points": points,
    }
    _echo_json(ReportService(output_dir).export_table(frame, "heatmap", params))


@main.command("trace-gen")
@click.option("--seed", type=int, required=True)
@click.option("--mean-bandwidth", type=float, required=True, help="bits/s")
@click.option("--fluctuation", type=float, default=0.0, show_default=True, help="Fraction f, bandwidth in mean·[1-f, 1+f]")
@click.option("--latency", type=float, required=True, help="seconds")
@click.option("--duration", type=float, default=3600.0, show_default=True, help="seconds")
@click.option("--interval", type=float, default=10.0, show_default=True, help="seconds between samples")
@click.option("--out", "out", type=click.Path(dir_okay=False), required=True, help="Trace CSV to write")
@_domain_errors
def trace_gen(seed, mean_bandwidth, fluctuation, latency, duration, interval, out):
    """Generate a deterministic fluctuating-bandwidth trace CSV."""
    from app.services.network import TRACE_PRNG, gen_trace, save_trace

    trace = gen_trace(seed, mean_bandwidth, fluctuation, latency, duration, interval)
    path = save_trace(trace, out)
    _echo_json({"path": str(path), "samples": len(trace), "prng": TRACE_PRNG})


@main.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--output-dir", default=None, help="Overrides the config's output_dir")
@_domain_errors
def train(config_path, output_dir):
    """Run one experiment config (YAML or JSON) and write its files."""
    from app.services.experiment_service import load_experiment_config, run_experiment

    config = load_experiment_config(config_path)
    if output_dir is not None:
        config = config.model_copy(update={"output_dir": output_dir})
    result = run_experiment(config, write=True)
    click.echo(
        f"final loss {result.summary['final_loss']:.6g} "
        f"(gap {result.summary['final_gap']:.3g}) after {result.summary['iterations']} iterations, "
        f"simulated time {result.summary['sim_time_s']:.3f} s"
    )
    _echo_json(
        {
            "config_hash": result.config_hash,
            "run_csv": result.artifacts.run_csv,
            "sidecar": result.artifacts.sidecar,
            "summary": result.artifacts.summary,
        }
    )


@main.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--executor",
    type=click.Choice(["process", "serial", "celery"]),
    default="process",
    show_default=True,
    help="Where cells run; 'process' is capped by DDEF_MAX_WORKERS",
)
@click.option("--output-dir", default=None)
@_domain_errors
def sweep(config_path, executor, output_dir):
    """Run a comparison grid and write the time-to-target table."""
    from app.services.experiment_service import load_sweep_config
    from app.services.report_service import ReportService
    from app.services.sweep_service import SweepService

    config = load_sweep_config(config_path)
    table = SweepService().run(config, executor=executor)
    paths = ReportService(output_dir or config.base.output_dir).export_table(
        table, "sweep", config.model_dump(mode="json", exclude={"base": {"output_dir"}})
    )
    flagged = table.loc[table["status"] != "ok", "cell"].tolist()
    if flagged:
        click.echo(f"flagged cells: {', '.join(flagged)}", err=True)
    _echo_json(paths)


if __name__ == "__main__":
    main()
