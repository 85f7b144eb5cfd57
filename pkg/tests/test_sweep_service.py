"""
Comparison grids
"""
import math

import pytest

from app.models.experiment_models import SweepConfig
from app.services.sweep_service import SWEEP_COLUMNS, SweepService, cell_config, grid_cells
from tests.conftest import experiment_payload


def _sweep(output_dir, cells, baseline, target_gap=0.05, grid=None):
    payload = {
        "base": experiment_payload(output_dir, iterations=1000),
        "cells": cells,
        "baseline": baseline,
        "target_gap": target_gap,
        "grid": grid,
    }
    return SweepConfig.model_validate(payload)


def test_single_cell_speedup_is_one(output_dir):
    sweep = _sweep(output_dir, [{"name": "only", "variant": "d-sgd"}], "only")
    table = SweepService(max_workers=1).run(sweep, executor="serial")
    assert list(table.columns) == SWEEP_COLUMNS
    row = table.iloc[0]
    assert row["status"] == "ok"
    assert row["speedup_vs"] == 1.0
    assert row["baseline"] == "only"


def test_unreachable_target_is_flagged(output_dir):
    sweep = _sweep(output_dir, [{"name": "d-sgd", "variant": "d-sgd"}], "d-sgd", target_gap=1e-14)
    row = SweepService(max_workers=1).run(sweep, executor="serial").iloc[0]
    assert row["status"] == "target_not_reached"
    assert not row["reached"]
    assert math.isnan(row["speedup_vs"])


def test_diverging_cell_is_flagged(output_dir):
    cells = [{"name": "d-sgd", "variant": "d-sgd"}, {"name": "too-fast", "variant": "d-sgd", "gamma": 5.0}]
    table = SweepService(max_workers=1).run(_sweep(output_dir, cells, "d-sgd"), executor="serial")
    assert list(table["status"]) == ["ok", "diverged"]


def test_cell_overrides(output_dir):
    sweep = _sweep(output_dir, [{"name": "wide", "variant": "dd-sgd", "tau": 3, "n": 6}], "wide")
    config = cell_config(sweep, sweep.cells[0])
    assert (config.variant.value, config.tau, config.task.n, config.target_gap) == ("dd-sgd", 3, 6, 0.05)
    assert sweep.base.task.n == 3


def test_grid_expansion(output_dir):
    grid = {"tau_max": 1, "delta_points": 3, "delta_min": 0.01}
    sweep = _sweep(output_dir, [{"name": "d-sgd", "variant": "d-sgd"}], "d-sgd", grid=grid)
    cells = grid_cells(sweep)
    assert len(cells) == 1 + 2 * 3
    assert sorted({c.delta for c in cells[1:]}) == pytest.approx([0.01, 0.1, 1.0])


def test_process_pool_matches_serial(output_dir):
    cells = [{"name": "d-sgd", "variant": "d-sgd"}, {"name": "deco", "variant": "deco-adaptive"}]
    sweep = _sweep(output_dir, cells, "d-sgd")
    serial = SweepService(max_workers=1).run(sweep, executor="serial")
    pooled = SweepService(max_workers=2).run(sweep, executor="process")
    columns = ["cell", "status", "iterations_to_target", "time_to_target_s", "speedup_vs"]
    assert serial[columns].equals(pooled[columns])


def test_celery_executor(output_dir):
    sweep = _sweep(output_dir, [{"name": "d-sgd", "variant": "d-sgd"}], "d-sgd")
    table = SweepService().run(sweep, executor="celery")
    assert table.iloc[0]["status"] == "ok"


def test_unknown_executor(output_dir):
    sweep = _sweep(output_dir, [{"name": "d-sgd", "variant": "d-sgd"}], "d-sgd")
    with pytest.raises(ValueError):
        SweepService().run(sweep, executor="threads")
