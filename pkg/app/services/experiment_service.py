"""
Experiment configs: loading, network resolution and full training runs
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Type, TypeVar, Union

import yaml
from pydantic import BaseModel, ValidationError

from app.models.experiment_models import ExperimentConfig, NetworkConfig, RunRecord, SweepConfig
from app.services.network import NetworkTrace, TraceError, gen_trace, load_trace
from app.services.report_service import ReportService, RunArtifacts, config_hash
from app.services.synthetic_tasks import build_task
from app.services.trainer import plan_source_for, records_summary, train_run

logger = logging.getLogger(__name__)

ConfigModel = TypeVar("ConfigModel", bound=BaseModel)


class ConfigError(ValueError):
    """Config file missing, unreadable or failing schema validation"""


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """YAML (.yaml/.yml) or JSON (.json) mapping"""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    try:
        with open(path, encoding="utf-8") as f:
            if path.suffix == ".json":
                data = json.load(f)
            else:
                data = yaml.safe_load(f)
    except (yaml.YAMLError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot parse {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a mapping at the top level")
    return data


def parse_config(data: Dict[str, Any], model: Type[ConfigModel]) -> ConfigModel:
    try:
        return model.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid {model.__name__}: {e}") from e


def load_experiment_config(path: Union[str, Path]) -> ExperimentConfig:
    return parse_config(read_config_file(path), ExperimentConfig)


def load_sweep_config(path: Union[str, Path]) -> SweepConfig:
    return parse_config(read_config_file(path), SweepConfig)


def build_trace(network: NetworkConfig) -> NetworkTrace:
    """Network trace an experiment's network block describes"""
    if network.trace_path is not None:
        if not Path(network.trace_path).exists():
            raise ConfigError(f"Trace file not found: {network.trace_path}")
        return load_trace(network.trace_path)
    if network.generator is not None:
        g = network.generator
        return gen_trace(
            seed=g.seed,
            mean_bandwidth=g.mean_bandwidth,
            fluctuation_fraction=g.fluctuation_fraction,
            latency=g.latency,
            duration=g.duration,
            interval=g.interval,
        )
    return NetworkTrace.constant(bandwidth=network.bandwidth, latency=network.latency)


@dataclass
class ExperimentResult:
    config_hash: str
    records: List[RunRecord]
    summary: Dict[str, Any]
    artifacts: Optional[RunArtifacts] = None
    f_star: float = 0.0


def run_experiment(config: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Execute one configured run and (optionally) write its files"""
    digest = config_hash(config.hashable_dict())
    logger.info(f"Running experiment {digest[:12]} ({config.variant.value})")

    try:
        trace = build_trace(config.network)
    except TraceError as e:
        raise ConfigError(str(e)) from e
    task = build_task(config.task, exact=config.exact)
    source = plan_source_for(
        config.variant,
        tau=config.tau,
        delta=config.delta,
        replan_every=config.replan_every,
        trace=trace,
        regime=config.regime,
    )
    records = train_run(
        task,
        config.variant,
        source,
        gamma=config.gamma,
        iterations=config.iterations,
        t_comp=config.compute.t_comp,
        s_g=config.compute.s_g,
        trace=trace,
        probe=config.probe,
        seed=config.seed,
        target_gap=config.target_gap,
    )
    f_star = float(task.f_star)
    summary = {
        "variant": config.variant.value,
        "f_star": f_star,
        **records_summary(records, f_star, config.target_gap),
    }
    if config.probe:
        summary["max_nvs_residual"] = max(r.nvs_residual for r in records)

    artifacts = ReportService(config.output_dir).export_run(records, config, summary) if write else None
    return ExperimentResult(
        config_hash=digest, records=records, summary=summary, artifacts=artifacts, f_star=f_star
    )
