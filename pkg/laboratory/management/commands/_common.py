import logging
import re
from contextlib import contextmanager
from fractions import Fraction

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from laboratory.exceptions import (
    NUMERICAL_FAILURES, CatalogError, ConfigurationError, DomainError, LaboratoryError,
)
from laboratory.services.moments import RayPairContour
from laboratory.services.numerics import PrecisionCtx

logger = logging.getLogger(__name__)

CHECK_FAILED = 1
CONFIGURATION_ERROR = 2
NUMERICAL_FAILURE = 3
FORMATS = ('json', 'csv', 'svg')
CONTOURS_PATTERN = re.compile(r'(\d+),(\d+)[,;](\d+),(\d+)')


def parse_contours(text, K):
    """'l1,k1,l2,k2' (or 'l1,k1;l2,k2') -> the two RayPairContour objects."""
    match = CONTOURS_PATTERN.fullmatch(text.strip())
    if match is None:
        raise CommandError(f"--contours expects 'l1,k1,l2,k2', got {text!r}", returncode=CONFIGURATION_ERROR)
    values = [int(v) for v in match.groups()]
    try:
        contour_n = RayPairContour(K=K, ell=values[0], kappa=values[1])
        contour_m = RayPairContour(K=K, ell=values[2], kappa=values[3])
    except DomainError as e:
        raise CommandError(f"--contours {text!r}: {e}", returncode=CONFIGURATION_ERROR)
    return contour_n, contour_m


def parse_alpha(text):
    """'3/10' -> Fraction(3, 10); decimal text stays a string for exact parsing."""
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise CommandError(f"--alpha expects a number, got {text!r}", returncode=CONFIGURATION_ERROR)
    if not 0 < value < Fraction(1, 2):
        raise CommandError(f"--alpha must lie in (0, 1/2), got {text}", returncode=CONFIGURATION_ERROR)
    return value if '/' in text else text


class LaboratoryCommand(BaseCommand):
    """Shared flags and the exit-code contract of the laboratory commands."""

    def add_precision_arguments(self, parser):
        parser.add_argument('--digits', type=int, default=None, help='Working precision in decimal digits')
        parser.add_argument('--out', default=None, help='Output directory (default: MOPS_LAB OUTPUT_DIR)')
        parser.add_argument(
            '--format', action='append', choices=FORMATS, dest='formats',
            help='Output format; repeat for several (default: all)',
        )

    def add_alpha_argument(self, parser):
        parser.add_argument('--alpha', required=True, help='alpha in (0, 1/2), as a decimal or a fraction n/N')

    def context(self, options, geometry=False):
        try:
            return PrecisionCtx.from_settings(digits=options.get('digits'), geometry=geometry)
        except ConfigurationError as e:
            raise CommandError(str(e), returncode=CONFIGURATION_ERROR)

    def formats(self, options):
        return tuple(options.get('formats') or FORMATS)

    def output_dir(self, options):
        return options.get('out') or settings.MOPS_LAB['OUTPUT_DIR']

    @contextmanager
    def exit_codes(self):
        """Map laboratory errors to CommandError return codes."""
        try:
            yield
        except NUMERICAL_FAILURES as e:
            logger.error(f"Numerical failure: {str(e)}")
            raise CommandError(str(e), returncode=NUMERICAL_FAILURE)
        except (ConfigurationError, CatalogError, DomainError) as e:
            raise CommandError(str(e), returncode=CONFIGURATION_ERROR)
        except LaboratoryError as e:
            logger.error(f"Laboratory error: {str(e)}")
            raise CommandError(str(e), returncode=NUMERICAL_FAILURE)

    def finish(self, report):
        for check in report.checks:
            style = self.style.SUCCESS if check.passed else (self.style.WARNING if check.flag_only else self.style.ERROR)
            self.stdout.write(style(f"{check.name}: {'pass' if check.passed else 'FAIL'} {check.measured or ''}"))
        for path in report.files:
            self.stdout.write(f"Wrote {path}")
        if report.exit_code:
            raise CommandError(f"{report.experiment_id} finished with exit code {report.exit_code}", returncode=report.exit_code)
        self.stdout.write(self.style.SUCCESS(f"{report.experiment_id} passed"))
