import os
from celery import Celery

# Set the default Django settings module
os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'mops_lab.settings')

app = Celery('mops_lab')
app.config_from_object('django.conf:settings', namespace='CELERY')
app.conf.update(
    worker_pool='prefork',
    broker_connection_retry_on_startup=True,
)

# Load task modules from all registered Django apps
app.autodiscover_tasks()
