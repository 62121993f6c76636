import os
from pathlib import Path

import dj_database_url
from dotenv import load_dotenv

# Load environment variables before any other settings
load_dotenv()

BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.getenv('SECRET_KEY', 'django-insecure-mops-lab-local-only')

DEBUG = os.getenv('DEBUG', 'False').lower() == 'true'

ALLOWED_HOSTS = ['localhost', '127.0.0.1']

INSTALLED_APPS = [
    # Local apps
    'laboratory.apps.LaboratoryConfig',

    # Django core apps
    'django.contrib.contenttypes',
]

MIDDLEWARE = []

# Run history only; the numerical services never touch the database
DATABASES = {
    'default': dj_database_url.config(
        default=os.getenv('DATABASE_URL', f"sqlite:///{BASE_DIR / 'db.sqlite3'}"),
        conn_max_age=0,
    )
}

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

# Laboratory configuration
MOPS_LAB = {
    'DEFAULT_DIGITS': int(os.getenv('MOPS_LAB_DIGITS', 400)),
    'GUARD_DIGITS': int(os.getenv('MOPS_LAB_GUARD_DIGITS', 20)),
    'GEOMETRY_DIGITS': int(os.getenv('MOPS_LAB_GEOMETRY_DIGITS', 50)),
    'CACHE_DIR': os.getenv('MOPS_LAB_CACHE_DIR', str(BASE_DIR / 'cache')),
    'OUTPUT_DIR': os.getenv('MOPS_LAB_OUTPUT_DIR', str(BASE_DIR / 'output')),
    'JOBS': int(os.getenv('MOPS_LAB_JOBS', 1)),
    'CHECK_RESIDUALS': os.getenv('MOPS_LAB_CHECK_RESIDUALS', 'False').lower() == 'true',
    'BRANCH_BALL': 1e-4,
    'BOUNDING_BOX': 10,
    'REFERENCE_TRANSITIONS': {
        'alpha_c': '0.2578357',
        'tau_c': '0.1913565',
        'alpha_2': '0.354933',
        'tau1': None,
    },
    'FIGURE_CATALOG': os.getenv('MOPS_LAB_FIGURE_CATALOG', str(BASE_DIR / 'laboratory' / 'data' / 'figures.json')),
    'SCHEMA_VERSION': 1,
}

# Celery Configuration
CELERY_BROKER_URL = os.getenv("REDIS_URL", "redis://localhost:6379/0")
CELERY_RESULT_BACKEND = os.getenv("REDIS_URL", "redis://localhost:6379/0")

CELERY_ACCEPT_CONTENT = ['json']
CELERY_TASK_SERIALIZER = 'json'
CELERY_RESULT_SERIALIZER = 'json'

CELERY_TASK_ACKS_LATE = True
CELERY_BROKER_CONNECTION_RETRY_ON_STARTUP = True
CELERY_BROKER_CONNECTION_MAX_RETRIES = 10

# Without a broker, tasks run inline
CELERY_TASK_ALWAYS_EAGER = os.getenv('CELERY_TASK_ALWAYS_EAGER', 'True').lower() == 'true'

CELERY_WORKER_CONCURRENCY = 1

CELERY_TIMEZONE = 'UTC'

CELERY_TASK_ROUTES = {
    'laboratory.tasks.run_acceptance_task': {'queue': 'acceptance'},
    'laboratory.tasks.run_figure_task': {'queue': 'figures'},
    'laboratory.tasks.build_moment_table_task': {'queue': 'cache'},
}

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'DEBUG' if DEBUG else 'INFO',
    },
    'loggers': {
        'laboratory': {
            'handlers': ['console'],
            'level': os.getenv('MOPS_LAB_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}
