"""
Output files for runs, timing simulations and sweeps

Every file name carries the 12-character prefix of the config hash and every
JSON body the full hash. Nothing time-dependent is written, so re-running a
config reproduces its files byte for byte.
"""
import csv
import hashlib
import json
import logging
import os
from dataclasses import dataclass
from datetime import datetime
from typing import Any, Dict, List, Optional

import pandas as pd

from app.core.config import settings
from app.models.experiment_models import ExperimentConfig, RunRecord
from app.services.timing import PipelineSchedule

logger = logging.getLogger(__name__)

RUN_COLUMNS = ["iter", "sim_time_s", "loss", "grad_norm_sq", "tau", "delta"]
PROBE_COLUMN = "nvs_residual"
HASH_PREFIX = 12


def config_hash(payload: Dict[str, Any]) -> str:
    """sha256 of the canonical (sorted, compact) JSON form"""
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class RunArtifacts:
    """Paths written for one training run"""
    config_hash: str
    run_csv: str
    sidecar: str
    summary: Optional[str] = None


class ReportService:
    """Writes run logs, config sidecars, summaries and comparison tables"""

    def __init__(self, output_dir: Optional[str] = None):
        self.export_path = output_dir or settings.output_dir
        os.makedirs(self.export_path, exist_ok=True)

    def _path(self, filename: str) -> str:
        return os.path.join(self.export_path, filename)

    def _write_json(self, filepath: str, body: Dict[str, Any]) -> str:
        with open(filepath, "w", encoding="utf-8") as f:
            json.dump(body, f, indent=2, sort_keys=True, ensure_ascii=False)
            f.write("\n")
        return filepath

    def export_run(
        self,
        records: List[RunRecord],
        config: ExperimentConfig,
        summary: Optional[Dict[str, Any]] = None,
    ) -> RunArtifacts:
        """Run CSV, config sidecar and (optionally) summary JSON"""
        digest = config_hash(config.hashable_dict())
        stem = f"run_{digest[:HASH_PREFIX]}"
        probe = config.probe

        run_csv = self._path(f"{stem}.csv")
        with open(run_csv, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(RUN_COLUMNS + ([PROBE_COLUMN] if probe else []))
            for record in records:
                row = [
                    record.iteration,
                    repr(record.sim_time_s),
                    repr(record.loss),
                    repr(record.grad_norm_sq),
                    record.tau,
                    repr(record.delta),
                ]
                if probe:
                    row.append(repr(record.nvs_residual))
                writer.writerow(row)
        logger.info(f"Run log exported: {run_csv} ({len(records)} rows)")

        sidecar = self._write_json(
            self._path(f"{stem}.config.json"),
            {"config_hash": digest, "config": config.hashable_dict()},
        )
        artifacts = RunArtifacts(config_hash=digest, run_csv=run_csv, sidecar=sidecar)

        if summary is not None:
            artifacts.summary = self._write_json(
                self._path(f"{stem}.summary.json"), {"config_hash": digest, **summary}
            )
        return artifacts

    def export_schedule(
        self, schedule: PipelineSchedule, summary: Dict[str, Any], params: Dict[str, Any]
    ) -> Dict[str, str]:
        """TS/TM/TC table plus summary JSON of one pipeline simulation"""
        digest = config_hash(params)
        stem = f"timing_{digest[:HASH_PREFIX]}"

        schedule_csv = self._path(f"{stem}.csv")
        schedule.to_frame().to_csv(schedule_csv, index=False, encoding="utf-8", lineterminator="\n")
        summary_json = self._write_json(
            self._path(f"{stem}.summary.json"),
            {"config_hash": digest, "params": params, **summary},
        )
        logger.info(f"Timing schedule exported: {schedule_csv}")
        return {"config_hash": digest, "schedule_csv": schedule_csv, "summary_json": summary_json}

    def export_table(self, frame: pd.DataFrame, prefix: str, params: Dict[str, Any]) -> Dict[str, str]:
        """Tidy table (sweep comparison, efficiency grid) plus a JSON header"""
        digest = config_hash(params)
        stem = f"{prefix}_{digest[:HASH_PREFIX]}"

        table_csv = self._path(f"{stem}.csv")
        frame.to_csv(table_csv, index=False, encoding="utf-8", lineterminator="\n")
        header = self._write_json(self._path(f"{stem}.config.json"), {"config_hash": digest, "config": params})
        logger.info(f"Table exported: {table_csv} ({len(frame)} rows)")
        return {"config_hash": digest, "table_csv": table_csv, "config_json": header}

    def get_exported_reports(self) -> List[Dict[str, Any]]:
        """List files in the output directory"""
        reports = []
        for filename in os.listdir(self.export_path):
            if filename.endswith((".json", ".csv")):
                filepath = self._path(filename)
                stat = os.stat(filepath)
                reports.append(
                    {
                        "filename": filename,
                        "filepath": filepath,
                        "size": stat.st_size,
                        "modified": datetime.fromtimestamp(stat.st_mtime).isoformat(),
                        "format": filename.split(".")[-1],
                    }
                )
        return sorted(reports, key=lambda x: x["filename"])
