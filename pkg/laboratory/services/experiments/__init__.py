from laboratory.services.experiments.acceptance import run_acceptance
from laboratory.services.experiments.catalog import FigureCatalog, FigureSpec
from laboratory.services.experiments.runner import CheckResult, ExperimentConfig, ExperimentReport, run_figure

__all__ = (
    'CheckResult', 'ExperimentConfig', 'ExperimentReport', 'FigureCatalog', 'FigureSpec', 'run_acceptance', 'run_figure',
)
