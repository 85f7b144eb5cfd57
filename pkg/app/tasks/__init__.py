"""
Celery tasks package for background training runs.
"""
