"""CLI commands: simulate, fit, evaluate, identity-check, convert-dated-rewards"""

import asyncio
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import click
import numpy as np
import pandas as pd
from pydantic import BaseModel

from ..config import settings
from ..exceptions import NumericalError
from ..models.dataset import Dataset
from ..models.params import DdmParams, LnrParams
from ..schemas.report import IdentityCheckReport
from ..schemas.run import Design, EvaluationConfig, ModelKind, RunConfig, SimulationConfig
from ..services import ddm_math, simulators
from ..services.evaluation import results_frame, summarize
from ..services.experiment_manager import experiment_manager
from ..utils import csv_io
from ..utils.dated_rewards import convert_dated_rewards

logger = logging.getLogger(__name__)

MODEL_CHOICES = click.Choice([kind.value for kind in ModelKind])


def _floats(text: Optional[str]) -> Optional[List[float]]:
    """Parse a comma-separated list such as "0.3,-0.1" """
    if text is None:
        return None
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got '{text}'")


def _echo_path(path: Path):
    click.echo(str(path))


# simulate
def _design_pairs(cfg: SimulationConfig, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    if cfg.design == Design.FIXED:
        return np.tile(cfg.x, (cfg.n, 1)), np.tile(cfg.y, (cfg.n, 1))
    if cfg.design == Design.DATED_REWARDS:
        return simulators.dated_reward_pairs(cfg.n, rng)
    return simulators.uniform_pairs(cfg.n, cfg.d, rng)


def _design_dimension(cfg: SimulationConfig) -> int:
    if cfg.design == Design.FIXED:
        return len(cfg.x)
    if cfg.design in (Design.DATED_REWARDS, Design.POPULATION):
        return 2
    return cfg.d


def run_simulation(cfg: SimulationConfig) -> Tuple[List[Tuple[str, Dataset]], Dict[str, BaseModel]]:
    """Generate every agent's dataset and the parameters that produced it"""
    if cfg.n == 0:
        return [], {}
    if cfg.design == Design.POPULATION:
        population = simulators.synthetic_population(cfg.n_agents, cfg.n, cfg.seed)
        return [(agent_id, ds) for agent_id, ds, _ in population], {
            agent_id: params for agent_id, _, params in population
        }

    if cfg.model == ModelKind.LNR:
        params = LnrParams(w=cfg.w, d0=cfg.d0, rho=cfg.rho)
    else:
        params = DdmParams(w=cfg.w, b=cfg.b)
    start = simulators.start_for(cfg.b, cfg.start_fraction) if cfg.model == ModelKind.EXTENDED_DDM else None

    agents = []
    for index, child in enumerate(simulators.spawn_seeds(cfg.seed, cfg.n_agents)):
        rng = simulators.make_rng(child)
        X, Y = _design_pairs(cfg, rng)
        ds = simulators.simulate_dataset(cfg.model.value, X, Y, params, rng, start=start, dt=cfg.dt)
        agents.append((f"agent_{index:03d}", ds))
    return agents, {agent_id: params for agent_id, _ in agents}


@click.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path), help="JSON config file")
@click.option("--model", type=MODEL_CHOICES, help="Generative model")
@click.option("--design", type=click.Choice([design.value for design in Design]), help="Attribute design")
@click.option("--seed", type=int, help="Random seed")
@click.option("--n", "n", type=int, help="Rows per agent")
@click.option("--n-agents", type=int, help="Number of agents")
@click.option("--d", "d", type=int, help="Attribute dimension for the uniform design")
@click.option("--w", "w", help="Weights, comma separated")
@click.option("--b", "b", type=float, help="Boundary")
@click.option("--x", "x", help="Left attributes for the fixed design")
@click.option("--y", "y", help="Right attributes for the fixed design")
@click.option("--start-fraction", type=float, help="Extended DDM start half-width as a fraction of b")
@click.option("--dt", type=float, help="Path-simulation time step")
@click.option("--out", "out", type=click.Path(dir_okay=False, path_type=Path), help="Output CSV")
def simulate(config_path, model, design, seed, n, n_agents, d, w, b, x, y, start_fraction, dt, out):
    """Simulate choice/response-time data and write it as CSV."""
    cfg = SimulationConfig.load(
        config_path,
        model=model,
        design=design,
        seed=seed,
        n=n,
        n_agents=n_agents,
        d=d,
        w=_floats(w),
        b=b,
        x=_floats(x),
        y=_floats(y),
        start_fraction=start_fraction,
        dt=dt,
        output_path=out,
    )
    output = cfg.output_path or settings.output_base_path / "simulated.csv"
    agents, params = run_simulation(cfg)
    csv_io.write_csv(output, agents, _design_dimension(cfg))
    csv_io.write_params(csv_io.params_sidecar_path(output), params)
    _echo_path(output)


# fit / evaluate
def _run_config(
    config_path, input_path, config_cls=RunConfig, **flags
) -> Tuple[RunConfig, List[Tuple[str, Dataset]]]:
    cfg = config_cls.load(config_path, input_path=input_path, **flags)
    if cfg.input_path is None:
        raise click.UsageError("an input CSV is required")
    return cfg, csv_io.parse_csv(cfg.input_path)


def _common_fit_options(command):
    options = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path), help="JSON config file"),
        click.option("--seed", type=int, help="Random seed"),
        click.option("--ddm-solver", type=click.Choice(["sgd", "exact"]), help="Speed-accuracy solver"),
        click.option("--b-method", type=click.Choice(["moment-match", "combine", "none"]), help="Boundary recovery"),
        click.option("--reg", type=float, help="Logistic ridge coefficient"),
        click.option("--lam", type=float, help="SGD step-size override"),
        click.option("--passes", type=int, help="SGD passes"),
        click.option("--workers", "max_workers", type=int, help="Concurrent agents"),
        click.option("--tol", type=float, help="Series tolerance"),
    ]
    for option in reversed(options):
        command = option(command)
    return command


@click.command()
@click.argument("input_path", required=False, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--model", type=MODEL_CHOICES, help="Model to fit")
@click.option("--out", "out", type=click.Path(dir_okay=False, path_type=Path), help="Output JSON")
@_common_fit_options
def fit(input_path, model, out, config_path, **flags):
    """Fit one model per agent and write FitReports as JSON."""
    cfg, agents = _run_config(config_path, input_path, model=model, output_path=out, **flags)
    reports = asyncio.run(experiment_manager.fit_agents(agents, cfg))
    output = cfg.output_path or settings.output_base_path / "fit_reports.json"
    csv_io.write_json(output, reports)
    _echo_path(output)


def write_evaluation(out_dir: Path, results, summary):
    """agent_results.{csv,json}, summary.json, summary_means.csv, summary_cdf.csv, summary_histograms.csv"""
    out_dir.mkdir(parents=True, exist_ok=True)
    results_frame(results).to_csv(out_dir / "agent_results.csv", index=False, lineterminator="\n")
    csv_io.write_json(out_dir / "agent_results.json", results)
    csv_io.write_json(out_dir / "summary.json", summary)

    pd.DataFrame(
        [{"metric": metric, "mean": value} for metric, value in summary.means.items()]
    ).to_csv(out_dir / "summary_means.csv", index=False, lineterminator="\n")

    cdf_rows = [
        {"metric": metric, "x": x, "cdf": p}
        for metric, grid in summary.cdf_grids.items()
        for x, p in zip(grid["x"], grid["cdf"])
    ]
    pd.DataFrame(cdf_rows, columns=["metric", "x", "cdf"]).to_csv(
        out_dir / "summary_cdf.csv", index=False, lineterminator="\n"
    )

    histogram_rows = [
        {"metric": metric, "left": left, "right": right, "count": count}
        for metric, hist in summary.histograms.items()
        for left, right, count in zip(hist["edges"][:-1], hist["edges"][1:], hist["counts"])
    ]
    pd.DataFrame(histogram_rows, columns=["metric", "left", "right", "count"]).to_csv(
        out_dir / "summary_histograms.csv", index=False, lineterminator="\n"
    )


@click.command()
@click.argument("input_path", required=False, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--n-train", type=int, help="Training rows per agent (first rows)")
@click.option("--oracle-params", "oracle_params_path", type=click.Path(dir_okay=False, path_type=Path),
              help="Use these DDM parameters instead of fitting")
@click.option("--out", "out", type=click.Path(file_okay=False, path_type=Path), help="Output directory")
@_common_fit_options
def evaluate(input_path, n_train, oracle_params_path, out, config_path, **flags):
    """Train on the first rows of each agent, score on the rest, summarize."""
    cfg, agents = _run_config(
        config_path,
        input_path,
        config_cls=EvaluationConfig,
        n_train=n_train,
        oracle_params_path=oracle_params_path,
        output_path=out,
        **flags,
    )
    if not agents:
        raise click.UsageError("input contains no agents")
    oracle = csv_io.read_oracle_params(cfg.oracle_params_path) if cfg.oracle_params_path else None
    results = asyncio.run(experiment_manager.evaluate_agents(agents, cfg, oracle))
    output = cfg.output_path or settings.output_base_path / "evaluation"
    write_evaluation(output, results, summarize(results))
    _echo_path(output)


@click.command("identity-check")
@click.option("--n-points", type=int, default=10_000, show_default=True, help="Grid size")
@click.option("--limit", type=float, default=50.0, show_default=True, help="Grid covers [-limit, limit]")
@click.option("--out", "out", type=click.Path(dir_okay=False, path_type=Path), help="Also write the JSON here")
def identity_check(n_points, limit, out):
    """Run the closed-form identity and inequality suite and print residuals."""
    report = IdentityCheckReport(**ddm_math.run_identity_suite(n_points, limit))
    click.echo(json.dumps(report.model_dump(mode="json"), indent=2))
    if out is not None:
        csv_io.write_json(out, report)
    if not report.passed:
        raise NumericalError("identity suite exceeded its tolerances")


@click.command("convert-dated-rewards")
@click.argument("input_path", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--out", "out", required=True, type=click.Path(dir_okay=False, path_type=Path), help="Output CSV")
@click.option("--subject-col", default="subject", show_default=True)
@click.option("--immediate-col", default="immediate_amount", show_default=True)
@click.option("--delayed-col", default="delayed_amount", show_default=True)
@click.option("--delay-col", default="delay", show_default=True)
@click.option("--choice-col", default="choice", show_default=True)
@click.option("--rt-col", default="rt", show_default=True)
@click.option("--immediate-code", default="1", show_default=True, help="Choice value meaning 'took the immediate amount'")
@click.option("--rt-unit", type=click.Choice(["s", "ms"]), default="s", show_default=True)
def convert_dated_rewards_command(input_path, out, **columns):
    """Convert a dated-rewards table to the rtpref CSV schema."""
    _echo_path(convert_dated_rewards(input_path, out, **columns))
