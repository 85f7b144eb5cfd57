"""
Sweep Service

Runs every cell of a comparison grid to a target optimality gap and tabulates
time-to-target on the simulated clock. Cells are independent and run in a
process pool capped by ``max_parallel_cells``; results keep cell order.
"""
import gc
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from app.core.config import settings
from app.models.experiment_models import AlgoVariant, ExperimentConfig, SweepCell, SweepConfig
from app.services.trainer import DivergenceError

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = [
    "cell",
    "variant",
    "tau",
    "delta",
    "n",
    "status",
    "reached",
    "iterations_to_target",
    "time_to_target_s",
    "final_gap",
    "sim_time_s",
    "speedup_vs",
    "baseline",
    "processing_time_s",
    "memory_mb",
]


@dataclass
class CellResult:
    """Outcome of one sweep cell"""
    cell: str
    variant: str
    tau: Optional[int]
    delta: Optional[float]
    n: int
    status: str  # 'ok', 'target_not_reached', 'diverged'
    reached: bool
    iterations_to_target: Optional[int]
    time_to_target_s: Optional[float]
    final_gap: Optional[float]
    sim_time_s: Optional[float]
    processing_time_s: float
    memory_mb: float


def grid_cells(sweep: SweepConfig) -> List[SweepCell]:
    """Explicit cells followed by the exhaustive DD-EF-SGD grid, if any"""
    cells = list(sweep.cells)
    if sweep.grid is not None:
        grid = sweep.grid
        deltas = np.logspace(math.log10(grid.delta_min), 0.0, grid.delta_points)
        deltas[-1] = 1.0
        for tau in range(grid.tau_max + 1):
            for delta in deltas:
                cells.append(
                    SweepCell(
                        name=f"grid-tau{tau}-delta{float(delta):.4g}",
                        variant=AlgoVariant.DD_EF_SGD,
                        tau=tau,
                        delta=float(delta),
                    )
                )
    return cells


def cell_config(sweep: SweepConfig, cell: SweepCell) -> ExperimentConfig:
    """Base config with the cell's overrides and the sweep's target gap"""
    overrides: Dict[str, Any] = {"variant": cell.variant, "target_gap": sweep.target_gap}
    for name in ("tau", "delta", "replan_every", "gamma"):
        value = getattr(cell, name)
        if value is not None:
            overrides[name] = value
    if cell.n is not None:
        overrides["task"] = sweep.base.task.model_copy(update={"n": cell.n})
    return sweep.base.model_copy(update=overrides)


def _get_memory_usage() -> float:
    """Resident memory of this process in MB"""
    try:
        import psutil
        process = psutil.Process()
        return process.memory_info().rss / 1024 / 1024
    except Exception:
        return 0.0


def run_cell(cell_payload: Dict[str, Any], config_payload: Dict[str, Any]) -> Dict[str, Any]:
    """Run one cell from plain dicts (picklable for process and Celery workers)"""
    from app.services.experiment_service import run_experiment

    cell = SweepCell.model_validate(cell_payload)
    config = ExperimentConfig.model_validate(config_payload)
    start_time = time.perf_counter()
    common = {
        "cell": cell.name,
        "variant": cell.variant.value,
        "n": config.task.n,
    }

    try:
        result = run_experiment(config, write=False)
        summary = result.summary
        last = result.records[-1]
        reached = bool(summary.get("reached"))
        outcome = CellResult(
            **common,
            tau=last.tau,
            delta=last.delta,
            status="ok" if reached else "target_not_reached",
            reached=reached,
            iterations_to_target=summary.get("iterations_to_target"),
            time_to_target_s=summary.get("time_to_target_s"),
            final_gap=summary["final_gap"],
            sim_time_s=summary["sim_time_s"],
            processing_time_s=time.perf_counter() - start_time,
            memory_mb=_get_memory_usage(),
        )
        if not reached:
            logger.warning(f"Cell {cell.name}: target gap {config.target_gap:g} not reached")
    except DivergenceError as e:
        logger.warning(f"Cell {cell.name} diverged: {e}")
        outcome = CellResult(
            **common,
            tau=config.tau,
            delta=config.delta,
            status="diverged",
            reached=False,
            iterations_to_target=None,
            time_to_target_s=None,
            final_gap=None,
            sim_time_s=None,
            processing_time_s=time.perf_counter() - start_time,
            memory_mb=_get_memory_usage(),
        )
    finally:
        gc.collect()
    return asdict(outcome)


def comparison_table(rows: List[Dict[str, Any]], baseline: str) -> pd.DataFrame:
    """One row per cell; speedup_vs = baseline time-to-target / cell time-to-target"""
    frame = pd.DataFrame(rows)
    base_rows = frame.loc[frame["cell"] == baseline, "time_to_target_s"]
    base_time = base_rows.iloc[0] if len(base_rows) else None

    def speedup(cell_time):
        if base_time is None or pd.isna(base_time) or cell_time is None or pd.isna(cell_time) or cell_time <= 0:
            return np.nan
        return float(base_time) / float(cell_time)

    frame["speedup_vs"] = frame["time_to_target_s"].map(speedup)
    frame["baseline"] = baseline
    return frame[SWEEP_COLUMNS]


class SweepService:
    """Service for running comparison grids"""

    def __init__(self, max_workers: Optional[int] = None):
        self.max_workers = max_workers or settings.max_parallel_cells

    def run(
        self,
        sweep: SweepConfig,
        executor: str = "process",
        progress_callback: Optional[Callable[[int, int, Dict[str, Any]], None]] = None,
    ) -> pd.DataFrame:
        """
        Run every cell and build the comparison table

        Args:
            sweep: grid description
            executor: 'process' (local pool), 'serial' or 'celery'
            progress_callback: called with (done, total, row) as cells finish

        Returns:
            comparison table, one row per cell in cell order
        """
        cells = grid_cells(sweep)
        payloads = [(cell.model_dump(mode="json"), cell_config(sweep, cell).model_dump(mode="json")) for cell in cells]
        total = len(payloads)
        logger.info(f"Starting sweep: {total} cells, executor={executor}, max_workers={self.max_workers}")

        if executor == "serial" or (executor == "process" and (self.max_workers <= 1 or total == 1)):
            rows = []
            for cell_payload, config_payload in payloads:
                rows.append(run_cell(cell_payload, config_payload))
                if progress_callback:
                    progress_callback(len(rows), total, rows[-1])
        elif executor == "process":
            with ProcessPoolExecutor(max_workers=min(self.max_workers, total)) as pool:
                futures = [pool.submit(run_cell, c, p) for c, p in payloads]
                rows = []
                for future in futures:
                    rows.append(future.result())
                    if progress_callback:
                        progress_callback(len(rows), total, rows[-1])
        elif executor == "celery":
            from celery import group

            from app.tasks.training import run_sweep_cell

            job = group(run_sweep_cell.s(c, p) for c, p in payloads)
            rows = job.apply_async().get()
        else:
            raise ValueError(f"Unknown executor: {executor}")

        flagged = sum(1 for row in rows if row["status"] != "ok")
        if flagged:
            logger.warning(f"Sweep finished with {flagged}/{total} flagged cells")
        logger.info(f"Sweep finished: {total} cells")
        return comparison_table(rows, sweep.baseline)
