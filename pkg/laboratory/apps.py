from django.apps import AppConfig
import logging
import os

logger = logging.getLogger(__name__)


class LaboratoryConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'laboratory'

    def ready(self):
        from django.conf import settings
        config = settings.MOPS_LAB
        os.makedirs(config['CACHE_DIR'], exist_ok=True)
        logger.debug(
            f"Laboratory ready in PID {os.getpid()}: {config['DEFAULT_DIGITS']} digits, cache {config['CACHE_DIR']}"
        )
