"""
Celery configuration for background training runs and sweep cells.
"""
from celery import Celery

from app.core.config import settings

# Create Celery instance
celery_app = Celery(
    'ddef_sgd',
    broker=settings.redis_url,
    backend=settings.redis_url,
    include=[
        'app.tasks.training',
    ]
)

# Celery configuration
celery_app.conf.update(
    # Task settings
    task_serializer='json',
    accept_content=['json'],
    result_serializer='json',
    timezone='UTC',
    enable_utc=True,

    # Task routing
    task_routes={
        'app.tasks.training.run_training': {'queue': 'training'},
        'app.tasks.training.run_sweep_cell': {'queue': 'sweeps'},
    },

    # Task execution
    task_acks_late=True,
    worker_prefetch_multiplier=1,
    task_reject_on_worker_lost=True,

    # Result settings
    result_expires=86400,  # 1 day
    result_persistent=True,

    # Monitoring
    worker_send_task_events=True,
    task_send_sent_event=True,

    # Long runs and large sweep cells
    task_soft_time_limit=settings.task_time_limit - 300,
    task_time_limit=settings.task_time_limit,
    worker_max_tasks_per_child=50,
)

if __name__ == '__main__':
    celery_app.start()
