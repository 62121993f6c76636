from laboratory.management.commands._common import LaboratoryCommand
from laboratory.models import ExperimentRun
from laboratory.services.experiments import run_acceptance

SUITES = ('primary-all', 'fast')


class Command(LaboratoryCommand):
    help = 'Run an acceptance suite and write its report.json'

    def add_arguments(self, parser):
        parser.add_argument('--suite', choices=SUITES, default='primary-all')
        parser.add_argument('--jobs', type=int, default=None, help='Worker processes for the (n, m) solves')
        parser.add_argument('--out', default=None, help='Output directory (default: MOPS_LAB OUTPUT_DIR)')
        parser.add_argument('--background', action='store_true', help='Queue the suite on Celery and return its id')

    def handle(self, *args, **options):
        if options['background']:
            from laboratory.tasks import run_acceptance_task

            run = ExperimentRun.objects.create(
                kind='acceptance', target=options['suite'],
                parameters={'jobs': options['jobs'], 'out': options['out']},
            )
            run_acceptance_task.delay(run.pk)
            self.stdout.write(self.style.SUCCESS(f"Queued suite {options['suite']} as run {run.pk}"))
            return

        with self.exit_codes():
            report = run_acceptance(options['suite'], jobs=options['jobs'], output_dir=self.output_dir(options))
        self.finish(report)
