"""
Shared fixtures
"""
from fractions import Fraction

import pytest

from app.celery_app import celery_app
from app.models.experiment_models import TaskSpec
from app.services.synthetic_tasks import QuadraticTask
from app.services.timing import TimingParams

# Run Celery tasks in-process with an in-memory result store
celery_app.conf.update(
    broker_url="memory://",
    result_backend="cache+memory://",
    task_always_eager=True,
    task_eager_propagates=True,
    task_store_eager_result=True,
)


@pytest.fixture
def exact_params():
    """T_comp = 2, b = 1, S_g/a = 1 (δ = 1)"""
    return TimingParams(t_comp=Fraction(2), s_g=Fraction(1), a=Fraction(1), b=Fraction(1))


@pytest.fixture
def quadratic_spec():
    return TaskSpec(kind="quadratic", d=20, n=4, zeta=0.5, sigma=0.1, seed=3, mu=1.0, smoothness=10.0)


@pytest.fixture
def quadratic_task(quadratic_spec):
    return QuadraticTask(quadratic_spec)


@pytest.fixture
def output_dir(tmp_path):
    path = tmp_path / "runs"
    path.mkdir()
    return str(path)


def experiment_payload(output_dir: str, **overrides) -> dict:
    """Small, fast ExperimentConfig body"""
    payload = {
        "schema_version": 1,
        "seed": 5,
        "variant": "d-sgd",
        "gamma": 0.02,
        "iterations": 50,
        "task": {"kind": "quadratic", "d": 8, "n": 3, "zeta": 0.5, "sigma": 0.05, "init_scale": 1.0},
        "compute": {"t_comp": 0.25, "s_g": 5.0e7},
        "network": {"bandwidth": 1.0e8, "latency": 0.1},
        "output_dir": output_dir,
    }
    payload.update(overrides)
    return payload
