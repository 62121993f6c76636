"""
Celery worker for queued figure and acceptance runs.
"""
import os
import sys

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'mops_lab.settings')

import django

django.setup()

from django.conf import settings

from mops_lab.celery_setup import app

if __name__ == '__main__':
    # Each figure task forks its own solve pool; keep worker concurrency low.
    concurrency = os.getenv('MOPS_LAB_WORKERS', '1')
    argv = [
        'worker',
        f"--loglevel={settings.LOGGING['loggers']['laboratory']['level'].lower()}",
        f"--concurrency={concurrency}",
        '--queues=figures,acceptance,cache',
    ] + sys.argv[1:]
    app.worker_main(argv)
