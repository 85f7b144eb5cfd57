"""
Celery tasks for training runs and sweep cells.
"""
import logging
from typing import Any, Dict

from app.celery_app import celery_app
from app.models.experiment_models import ExperimentConfig
from app.services.sweep_service import run_cell

logger = logging.getLogger(__name__)


@celery_app.task(bind=True, name='app.tasks.training.run_training')
def run_training(self, config_payload: Dict[str, Any]):
    """
    Execute a full experiment config and write its output files.

    Args:
        config_payload: ExperimentConfig as a JSON-compatible dict

    Returns:
        dict: config hash, summary and written paths
    """
    from app.services.experiment_service import run_experiment

    try:
        self.update_state(
            state='PROGRESS',
            meta={'current': 0, 'total': 1, 'status': 'Running experiment...'}
        )
        config = ExperimentConfig.model_validate(config_payload)
        result = run_experiment(config, write=True)

        return {
            'status': 'completed',
            'config_hash': result.config_hash,
            'summary': result.summary,
            'run_csv': result.artifacts.run_csv,
            'sidecar': result.artifacts.sidecar,
        }

    except Exception as exc:
        logger.error(f"Training run failed: {str(exc)}", exc_info=True)
        return {
            'error': str(exc),
            'status': 'failed',
        }


@celery_app.task(name='app.tasks.training.run_sweep_cell')
def run_sweep_cell(cell_payload: Dict[str, Any], config_payload: Dict[str, Any]):
    """
    Run one sweep cell; divergence and unreached targets come back flagged, not raised.
    """
    return run_cell(cell_payload, config_payload)
