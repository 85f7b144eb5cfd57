"""
End-to-end properties of the compressor, pipeline model, planner and trainer
"""
from fractions import Fraction

import numpy as np
import pytest

from app.models.experiment_models import AlgoVariant, SweepConfig, TaskSpec
from app.services.compressor import top_k
from app.services.network import NetworkTrace
from app.services.planner import brute_force_plan, deco_plan, tau_range
from app.services.sweep_service import SweepService
from app.services.synthetic_tasks import QuadraticTask
from app.services.timing import (
    TimingParams,
    delta_star,
    efficiency_grid,
    error_bound,
    simulate_pipeline,
    t_avg_closed_form,
)
from app.services.trainer import FixedPlan, init_state, nvs_probe, records_summary, step, stepsize_advisory, train_run
from tests.conftest import experiment_payload


def _rng(tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([2024, tag]))


@pytest.mark.slow
@pytest.mark.parametrize("d", [1, 7, 256])
def test_top_k_contraction(d):
    rng = _rng(1)
    vectors = rng.standard_normal((1000, d))
    for k in range(1, d + 1):
        delta = Fraction(k, d)
        for v in vectors:
            dropped = top_k(v, delta) - v
            assert dropped @ dropped <= (1 - k / d) * (v @ v)


@pytest.mark.slow
def test_pipeline_error_bound():
    rng = _rng(2)
    t = 10_000
    for _ in range(500):
        p = TimingParams(
            t_comp=float(rng.uniform(0.01, 1.0)),
            s_g=float(rng.uniform(1e6, 1e9)),
            a=float(rng.uniform(1e6, 1e10)),
            b=float(rng.uniform(0.0, 2.0)),
        )
        delta = float(rng.uniform(0.001, 1.0))
        tau = int(rng.integers(0, 17))
        tc_t = simulate_pipeline(p, delta, tau, t).tc[t]
        gap = abs(tc_t - t * t_avg_closed_form(p, delta, tau))
        assert gap <= error_bound(p, delta) + 1e-9 * tc_t


def test_compute_bound_schedule_is_exact():
    # c <= T_comp and τ·T_comp >= b + c
    p = TimingParams(t_comp=Fraction(2), s_g=Fraction(1), a=Fraction(1), b=Fraction(1))
    schedule = simulate_pipeline(p, Fraction(1), 2, 200)
    assert schedule.ts == [2 * k for k in range(201)]


@pytest.mark.parametrize(
    "t_comp, b, c, tau",
    [
        (Fraction(2), Fraction(3), Fraction(1), 1),
        (Fraction(1), Fraction(5), Fraction(2), 1),
        (Fraction(1), Fraction(7), Fraction(1, 2), 3),
        (Fraction(1, 3), Fraction(4), Fraction(1, 5), 2),
    ],
)
def test_communication_bound_schedule_is_periodic(t_comp, b, c, tau):
    p = TimingParams(t_comp=t_comp, s_g=c, a=Fraction(1), b=b)
    period = tau + 1
    prefix = 10 * period
    schedule = simulate_pipeline(p, Fraction(1), tau, prefix + 4 * period)
    for k in range(prefix, schedule.iterations - period + 1):
        assert schedule.ts[k + period] - schedule.ts[k] == t_comp + b + c


def _random_exact_params(rng: np.random.Generator) -> TimingParams:
    a = Fraction(int(rng.integers(1, 1000)))
    return TimingParams(
        t_comp=Fraction(int(rng.integers(25, 101)), 100),
        s_g=a * Fraction(int(rng.integers(1, 201)), 100),
        a=a,
        b=Fraction(int(rng.integers(0, 201)), 100),
    )


@pytest.mark.slow
def test_planner_matches_oracle_and_saturates():
    rng = _rng(4)
    unclamped = 0
    for _ in range(200):
        p = _random_exact_params(rng)
        plan = deco_plan(p.s_g, p.a, p.b, p.t_comp)
        if plan.clamped:
            continue
        unclamped += 1
        tau_max = tau_range(p).stop
        grid = [delta_star(tau, p) for tau in range(tau_max + 1)] + [Fraction(1)]
        oracle = brute_force_plan(p, tau_max, grid)

        assert oracle.tau == plan.tau
        assert float(oracle.phi) == pytest.approx(float(plan.phi), rel=1e-12)
        assert t_avg_closed_form(p, plan.delta, plan.tau) == p.t_comp
    assert unclamped > 150


def test_virtual_sequence_exact_mini_runs():
    for seed in range(3):
        task = QuadraticTask(TaskSpec(d=2, n=2, sigma=0.1, seed=seed, init_scale=1.0)).as_exact()
        state = init_state(task, Fraction(1, 20), 2, 0.5, seed=seed, probe=True)
        for _ in range(20):
            step(AlgoVariant.DD_EF_SGD, state)
            assert nvs_probe(state).residual == 0


@pytest.mark.slow
def test_virtual_sequence_float_runs():
    rng = _rng(6)
    task = QuadraticTask(TaskSpec(d=20, n=4, zeta=0.5, sigma=0.1, seed=6, init_scale=1.0))
    for _ in range(20):
        delta = float(rng.uniform(0.05, 1.0))
        tau = int(rng.integers(0, 9))
        state = init_state(task, 0.01, tau, delta, seed=int(rng.integers(0, 1000)), probe=True)
        for _ in range(200):
            step(AlgoVariant.DD_EF_SGD, state)
            assert nvs_probe(state).residual < 1e-10


def _trajectory(task, variant, tau, delta, iterations):
    state = init_state(task, 0.01, tau, delta, seed=11)
    points = [state.x.copy()]
    for _ in range(iterations):
        step(variant, state)
        points.append(state.x.copy())
    return points


@pytest.mark.slow
@pytest.mark.parametrize(
    "tau, delta, reference",
    [(4, 1.0, AlgoVariant.DD_SGD), (0, 0.2, AlgoVariant.D_EF_SGD), (0, 1.0, AlgoVariant.D_SGD)],
)
def test_degradation_is_bitwise(quadratic_task, tau, delta, reference):
    ours = _trajectory(quadratic_task, AlgoVariant.DD_EF_SGD, tau, delta, 500)
    theirs = _trajectory(quadratic_task, reference, tau, delta, 500)
    assert all(np.array_equal(a, b) for a, b in zip(ours, theirs))


@pytest.mark.slow
@pytest.mark.parametrize("delta", [0.1, 0.5, 1.0])
@pytest.mark.parametrize("tau", [0, 2, 4])
def test_convergence_with_advisory_stepsize(delta, tau):
    task = QuadraticTask(TaskSpec(d=20, n=4, zeta=0.5, sigma=0.1, seed=0, mu=1.0, smoothness=10.0))
    gamma = stepsize_advisory(task.smoothness, delta, tau)
    trace = NetworkTrace.constant(bandwidth=1e8, latency=0.1)
    records = train_run(
        task, AlgoVariant.DD_EF_SGD, FixedPlan(tau, delta), gamma, 5000, 0.25, 5e7, trace, seed=0, target_gap=1e-3
    )
    assert records_summary(records, task.f_star, 1e-3)["reached"]


# Link-bound regime: a full gradient takes 4-20 compute steps to send, so only
# compressed pipelines keep up with compute
LINK_BOUND_COMPUTE = {"t_comp": 0.25, "s_g": 5.0e8}
LINK_BOUND_TASK = {
    "kind": "quadratic",
    "d": 100,
    "n": 2,
    "zeta": 0.0,
    "sigma": 0.1,
    "mu": 1.0,
    "smoothness": 4.0,
    "init_scale": 1.0,
}
SHARED_GAMMA = 5e-4

NETWORKS = {
    "constant-100mbps": {"bandwidth": 1e8, "latency": 0.1},
    "constant-500mbps": {"bandwidth": 5e8, "latency": 1.0},
    "fluctuating-100mbps": {
        "generator": {
            "seed": 1,
            "mean_bandwidth": 1e8,
            "fluctuation_fraction": 0.3,
            "latency": 0.2,
            "duration": 7200,
            "interval": 5,
        }
    },
}


def test_shared_stepsize_is_inside_every_advisory_bound():
    smoothness = LINK_BOUND_TASK["smoothness"]
    deltas = [*np.logspace(-2, 0, 16)[:-1], 1.0]
    for tau in range(0, 9):
        assert all(SHARED_GAMMA <= stepsize_advisory(smoothness, delta, tau) for delta in deltas)


@pytest.mark.slow
@pytest.mark.parametrize("network", list(NETWORKS))
def test_adaptive_deco_time_to_target(network, output_dir):
    cells = [
        {"name": "d-sgd", "variant": "d-sgd"},
        *({"name": f"dd-sgd-tau{tau}", "variant": "dd-sgd", "tau": tau} for tau in range(1, 9)),
        {"name": "static", "variant": "deco-static"},
        {"name": "adaptive", "variant": "deco-adaptive", "replan_every": 1},
    ]
    base = experiment_payload(
        output_dir,
        gamma=SHARED_GAMMA,
        iterations=12000,
        task=LINK_BOUND_TASK,
        compute=LINK_BOUND_COMPUTE,
        network=NETWORKS[network],
    )
    sweep = SweepConfig.model_validate(
        {
            "base": base,
            "cells": cells,
            "grid": {"tau_max": 8, "delta_points": 16, "delta_min": 0.01},
            "baseline": "d-sgd",
            "target_gap": 0.05,
        }
    )
    table = SweepService().run(sweep).set_index("cell")
    reached = table[table["reached"]]["time_to_target_s"]
    assert {"adaptive", "static", "d-sgd"} <= set(reached.index)

    adaptive = reached["adaptive"]
    rivals = reached[[c for c in reached.index if c == "d-sgd" or c == "static" or c.startswith("dd-sgd")]]
    grid_best = reached[[c for c in reached.index if c.startswith("grid-")]].min()
    assert adaptive <= rivals.min()
    assert adaptive <= grid_best * 1.10


def test_throughput_efficiency_monotone():
    bandwidths = np.logspace(7, 10, 20)
    latencies = np.linspace(0.0, 1.0, 20)
    for delta, tau in [(1.0, 0), (0.3, 2), (0.05, 6)]:
        frame = efficiency_grid(0.25, 5e7, bandwidths, latencies, delta, tau)
        table = frame.pivot(index="bandwidth_bps", columns="latency_s", values="throughput_efficiency")
        values = table.to_numpy()
        assert (np.diff(values, axis=1) <= 0).all()
        assert (np.diff(values, axis=0) >= 0).all()
        assert values[0, -1] == values.min()
