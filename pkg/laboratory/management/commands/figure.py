from django.core.management.base import CommandError

from laboratory.management.commands._common import CONFIGURATION_ERROR, LaboratoryCommand
from laboratory.models import ExperimentRun
from laboratory.services.experiments import ExperimentConfig, FigureCatalog, run_figure


class Command(LaboratoryCommand):
    help = 'Reproduce one catalogued figure: zeros, overlays, checks and report.json'

    def add_arguments(self, parser):
        parser.add_argument('figure_id', help="Catalog id, e.g. 'figure_zeros_N=30'; 'list' prints the catalog")
        parser.add_argument('--jobs', type=int, default=None, help='Worker processes for the (n, m) solves')
        parser.add_argument('--background', action='store_true', help='Queue the run on Celery and return its id')
        self.add_precision_arguments(parser)

    def handle(self, *args, **options):
        figure_id = options['figure_id']
        catalog = FigureCatalog()
        if figure_id == 'list':
            for name in catalog:
                self.stdout.write(f"{name}: {catalog.get(name).title}")
            return
        if figure_id not in catalog:
            raise CommandError(f"Unknown figure '{figure_id}'", returncode=CONFIGURATION_ERROR)

        if options['background']:
            from laboratory.tasks import run_figure_task

            run = ExperimentRun.objects.create(
                kind='figure', target=figure_id,
                parameters={
                    'digits': options['digits'], 'jobs': options['jobs'], 'out': options['out'],
                    'formats': list(self.formats(options)),
                },
            )
            run_figure_task.delay(run.pk)
            self.stdout.write(self.style.SUCCESS(f"Queued figure {figure_id} as run {run.pk}"))
            return

        with self.exit_codes():
            config = ExperimentConfig.from_settings(
                figure_id, digits=options['digits'], jobs=options['jobs'],
                output_dir=self.output_dir(options), formats=self.formats(options),
            )
            report = run_figure(figure_id, config=config, catalog=catalog)
        self.finish(report)
