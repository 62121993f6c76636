from django.core.management.base import CommandError

from laboratory.management.commands._common import (
    CHECK_FAILED, CONFIGURATION_ERROR, LaboratoryCommand, parse_contours,
)
from laboratory.services.moments import GAMMA_1, GAMMA_2, MomentCache


class Command(LaboratoryCommand):
    help = 'Build, verify, purge or list the on-disk moment tables'

    def add_arguments(self, parser):
        parser.add_argument('action', choices=('build', 'verify', 'purge', 'list'))
        parser.add_argument('--K', type=int, default=3, help='Weight exponent K (default: 3)')
        parser.add_argument('--contours', default=None, help="Ray pairs 'l1,k1,l2,k2' of the two weights (default: the K=3 pair)")
        parser.add_argument('--k-max', type=int, default=200, help='Largest moment index to build (default: 200)')
        parser.add_argument('--digits', type=int, default=None, help='Working precision in decimal digits')
        parser.add_argument('--cache-dir', default=None, help='Cache directory (default: MOPS_LAB CACHE_DIR)')

    def contours(self, options):
        if options['contours']:
            return parse_contours(options['contours'], options['K'])
        if options['K'] == 3:
            return GAMMA_1, GAMMA_2
        return None

    def handle(self, *args, **options):
        cache = MomentCache(options['cache_dir'])
        action = options['action']
        if action == 'list':
            for name in cache.tables():
                self.stdout.write(name)
            self.stdout.write(self.style.SUCCESS(f"{len(cache.tables())} table(s) in {cache.directory}"))
            return

        contours = self.contours(options)
        if action == 'purge':
            removed = sum(cache.purge(c) for c in contours) if contours else cache.purge()
            self.stdout.write(self.style.SUCCESS(f"Removed {removed} table(s)"))
            return
        if contours is None:
            raise CommandError('--contours is required for K != 3', returncode=CONFIGURATION_ERROR)

        ctx = self.context(options)
        with self.exit_codes():
            if action == 'build':
                for contour in contours:
                    table = cache.load_or_build(contour, options['k_max'], ctx)
                    self.stdout.write(self.style.SUCCESS(f"{contour.label}: k_max={table.k_max} at {ctx.digits} digits"))
                return
            failed = []
            for contour in contours:
                result = cache.verify(contour, ctx)
                line = f"{contour.label}: {'ok' if result['ok'] else 'FAILED'} ({result.get('max_residual', result.get('reason'))})"
                self.stdout.write(self.style.SUCCESS(line) if result['ok'] else self.style.ERROR(line))
                if not result['ok']:
                    failed.append(contour.label)
        if failed:
            raise CommandError(f"Verification failed for {', '.join(failed)}", returncode=CHECK_FAILED)
