from celery import shared_task
from django.utils import timezone
from laboratory.exceptions import CatalogError, ConfigurationError, DomainError, LaboratoryError
from laboratory.models import ExperimentRun
from laboratory.services.experiments import ExperimentConfig, run_acceptance, run_figure
from laboratory.services.moments import MomentCache, RayPairContour
from laboratory.services.numerics import PrecisionCtx
import logging

logger = logging.getLogger(__name__)


def _start(run_id):
    run = ExperimentRun.objects.get(pk=run_id)
    run.status = 'running'
    run.save(update_fields=['status'])
    return run


def _fail(run, error):
    logger.error(f"Run {run.pk} ({run.kind} {run.target}) failed: {str(error)}")
    run.status = 'error'
    run.exit_code = 2 if isinstance(error, (ConfigurationError, CatalogError, DomainError)) else 3
    run.report = {'error': str(error)}
    run.finished_at = timezone.now()
    run.save(update_fields=['status', 'exit_code', 'report', 'finished_at'])
    return run.exit_code


@shared_task
def run_figure_task(run_id):
    """Celery task reproducing one catalogued figure for an ExperimentRun."""
    run = _start(run_id)
    params = run.parameters
    try:
        config = ExperimentConfig.from_settings(
            run.target, digits=params.get('digits'), jobs=params.get('jobs'), output_dir=params.get('out'),
            formats=tuple(params.get('formats', ('json', 'csv', 'svg'))),
        )
        report = run_figure(run.target, config=config)
    except LaboratoryError as e:
        return _fail(run, e)
    run.finish(report, timezone.now())
    logger.info(f"Figure {run.target} finished with exit code {report.exit_code}")
    return report.exit_code


@shared_task
def run_acceptance_task(run_id):
    """Celery task running an acceptance suite for an ExperimentRun."""
    run = _start(run_id)
    params = run.parameters
    try:
        report = run_acceptance(run.target, jobs=params.get('jobs'), output_dir=params.get('out'))
    except LaboratoryError as e:
        return _fail(run, e)
    run.finish(report, timezone.now())
    logger.info(f"Acceptance suite {run.target} finished with exit code {report.exit_code}")
    return report.exit_code


@shared_task
def build_moment_table_task(K, ell, kappa, k_max, digits=None):
    """Build (or extend) one cached moment table."""
    ctx = PrecisionCtx.from_settings(digits=digits)
    table = MomentCache().load_or_build(RayPairContour(K=K, ell=ell, kappa=kappa), k_max, ctx)
    return table.k_max
