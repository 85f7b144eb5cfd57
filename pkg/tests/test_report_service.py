"""
Output files and config hashing
"""
import json

from app.models.experiment_models import ExperimentConfig
from app.services.experiment_service import run_experiment
from app.services.report_service import ReportService, config_hash
from app.services.timing import TimingParams, simulate_pipeline, summarize_schedule
from tests.conftest import experiment_payload


def test_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_hash_ignores_output_dir(tmp_path):
    first = ExperimentConfig.model_validate(experiment_payload(str(tmp_path / "x")))
    second = ExperimentConfig.model_validate(experiment_payload(str(tmp_path / "y")))
    assert config_hash(first.hashable_dict()) == config_hash(second.hashable_dict())


def test_run_files(output_dir):
    config = ExperimentConfig.model_validate(experiment_payload(output_dir))
    result = run_experiment(config)
    artifacts = result.artifacts

    lines = open(artifacts.run_csv, encoding="utf-8").read().splitlines()
    assert lines[0] == "iter,sim_time_s,loss,grad_norm_sq,tau,delta"
    assert len(lines) == 51
    assert artifacts.run_csv.endswith(f"run_{result.config_hash[:12]}.csv")

    sidecar = json.load(open(artifacts.sidecar, encoding="utf-8"))
    assert sidecar["config_hash"] == result.config_hash
    assert sidecar["config"]["variant"] == "d-sgd"

    summary = json.load(open(artifacts.summary, encoding="utf-8"))
    assert summary["config_hash"] == result.config_hash
    assert summary["iterations"] == 50


def test_probe_column(output_dir):
    config = ExperimentConfig.model_validate(
        experiment_payload(output_dir, variant="dd-ef-sgd", tau=2, delta=0.25, probe=True)
    )
    result = run_experiment(config)
    header = open(result.artifacts.run_csv, encoding="utf-8").readline().strip()
    assert header == "iter,sim_time_s,loss,grad_norm_sq,tau,delta,nvs_residual"
    assert result.summary["max_nvs_residual"] < 1e-10


def test_rerun_is_byte_identical(output_dir):
    config = ExperimentConfig.model_validate(experiment_payload(output_dir, variant="deco-adaptive", replan_every=10))
    first = run_experiment(config)
    first_bytes = open(first.artifacts.run_csv, "rb").read()
    sidecar_bytes = open(first.artifacts.sidecar, "rb").read()
    second = run_experiment(config)
    assert open(second.artifacts.run_csv, "rb").read() == first_bytes
    assert open(second.artifacts.sidecar, "rb").read() == sidecar_bytes


def test_schedule_export(output_dir):
    p = TimingParams(t_comp=2.0, s_g=1.0, a=1.0, b=1.0)
    schedule = simulate_pipeline(p, 1.0, 0, 10)
    params = {**p.to_dict(), "delta": 1.0, "tau": 0, "t": 10}
    paths = ReportService(output_dir).export_schedule(schedule, summarize_schedule(schedule, p, 1.0, 0), params)
    summary = json.load(open(paths["summary_json"], encoding="utf-8"))
    assert summary["t_avg_empirical"] == 4.0
    assert summary["config_hash"] == paths["config_hash"]
    assert open(paths["schedule_csv"], encoding="utf-8").readline().strip() == "k,ts_s,tm_s,tc_s"


def test_exported_reports_listing(output_dir):
    config = ExperimentConfig.model_validate(experiment_payload(output_dir))
    run_experiment(config)
    names = [r["filename"] for r in ReportService(output_dir).get_exported_reports()]
    assert len(names) == 3
    assert all(name.startswith("run_") for name in names)
