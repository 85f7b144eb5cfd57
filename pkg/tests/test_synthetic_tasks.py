"""
Synthetic objectives and the stochastic gradient oracle
"""
import numpy as np
import pytest

from app.models.experiment_models import TaskSpec
from app.services.synthetic_tasks import LogisticTask, QuadraticTask, build_task, worker_gradient


def test_quadratic_spectrum_in_band(quadratic_task):
    for a_i in quadratic_task.matrices:
        eigenvalues = np.linalg.eigvalsh(a_i)
        assert eigenvalues.min() == pytest.approx(1.0, rel=1e-9)
        assert eigenvalues.max() == pytest.approx(10.0, rel=1e-9)
        assert np.allclose(a_i, a_i.T)


def test_noiseless_gradient_is_analytic(quadratic_spec):
    task = QuadraticTask(quadratic_spec.model_copy(update={"sigma": 0.0}))
    x = np.linspace(-1, 1, task.d)
    rng = task.worker_rng(2)
    expected = task.matrices[2] @ (x - task.centers[2])
    assert np.array_equal(worker_gradient(task, x, 2, rng), expected)


def test_gradient_vanishes_at_worker_center(quadratic_spec):
    task = QuadraticTask(quadratic_spec.model_copy(update={"sigma": 0.0}))
    grad = worker_gradient(task, task.centers[1].copy(), 1, task.worker_rng(1))
    assert np.allclose(grad, 0.0, atol=1e-12)


def test_noise_is_unbiased():
    task = QuadraticTask(TaskSpec(d=4, n=2, sigma=0.5, seed=1))
    x = np.ones(task.d)
    rng = task.worker_rng(0)
    draws = 100_000
    mean = sum(worker_gradient(task, x, 0, rng) for _ in range(draws)) / draws
    analytic = task.local_gradient(x, 0)
    per_coordinate_sd = 0.5 / np.sqrt(task.d)
    assert np.all(np.abs(mean - analytic) <= 4 * per_coordinate_sd / np.sqrt(draws))


def test_worker_index_out_of_range(quadratic_task):
    with pytest.raises(IndexError):
        worker_gradient(quadratic_task, np.zeros(quadratic_task.d), quadratic_task.n, quadratic_task.worker_rng(0))


def test_optimum_has_zero_gradient(quadratic_task):
    assert np.allclose(quadratic_task.full_gradient(quadratic_task.x_star), 0.0, atol=1e-10)
    assert quadratic_task.loss(quadratic_task.x_star) == pytest.approx(quadratic_task.f_star)


def test_global_loss_is_worker_average(quadratic_task):
    x = np.full(quadratic_task.d, 0.3)
    per_worker = [
        0.5 * (x - c) @ a @ (x - c) for a, c in zip(quadratic_task.matrices, quadratic_task.centers)
    ]
    assert quadratic_task.loss(x) == pytest.approx(np.mean(per_worker), rel=1e-12)


def test_zero_heterogeneity_shares_center():
    task = QuadraticTask(TaskSpec(d=5, n=3, zeta=0.0, sigma=0.0))
    assert np.array_equal(task.centers, np.zeros((3, 5)))
    assert np.allclose(task.x_star, 0.0)


def test_exact_task_matches_float_task(quadratic_spec):
    task = QuadraticTask(quadratic_spec)
    exact = task.as_exact()
    x = exact.initial_point()
    assert float(exact.loss(x)) == pytest.approx(task.loss(np.zeros(task.d)), rel=1e-12)
    assert exact.exact and not task.exact


def test_logistic_optimum():
    task = LogisticTask(TaskSpec(kind="logistic", d=6, n=3, zeta=1.0, mu=0.1, seed=2))
    assert np.linalg.norm(task.full_gradient(task.x_star)) < 1e-8
    assert task.loss(np.zeros(task.d)) > task.f_star
    assert task.smoothness > task.strong_convexity


def test_build_task_rejects_exact_logistic():
    with pytest.raises(ValueError):
        build_task(TaskSpec(kind="logistic"), exact=True)


def test_same_seed_same_task():
    a = QuadraticTask(TaskSpec(seed=4))
    b = QuadraticTask(TaskSpec(seed=4))
    assert np.array_equal(a.matrices, b.matrices)
    assert np.array_equal(a.centers, b.centers)
