#!/usr/bin/env python3
"""
Celery worker startup script.
"""
import logging
import sys

# Add the app directory to Python path
sys.path.insert(0, '/app')

from app.celery_app import celery_app
from app.core.config import settings

# Import tasks to register them
from app.tasks.training import run_sweep_cell, run_training  # noqa: F401

logging.basicConfig(level=settings.log_level, format=settings.log_format)

if __name__ == '__main__':
    # Start Celery worker
    celery_app.worker_main([
        'worker',
        f'--loglevel={settings.log_level.lower()}',
        f'--concurrency={settings.max_parallel_cells}',
        '--queues=training,sweeps',
        '--hostname=worker@%h'
    ])
