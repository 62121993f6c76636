from django.core.management.base import CommandError

from laboratory.management.commands._common import CONFIGURATION_ERROR, LaboratoryCommand, parse_contours
from laboratory.services.experiments.artifacts import ArtifactWriter, tagged_complex
from laboratory.services.moments import MomentCache
from laboratory.services.mops import MopIndex, conjugation_defect, counting_measure, solve_mop


class Command(LaboratoryCommand):
    help = 'Solve the type I and type II multiple orthogonal polynomials of one (n, m)'

    def add_arguments(self, parser):
        parser.add_argument('--n', type=int, required=True, help='Degree n (contour of the first weight)')
        parser.add_argument('--m', type=int, required=True, help='Degree m (contour of the second weight)')
        parser.add_argument('--K', type=int, default=3, help='Weight exponent K in exp(-z^K) (default: 3)')
        parser.add_argument('--contours', default=None, help="Ray pairs 'l1,k1,l2,k2' of the two weights (required for K != 3)")
        self.add_precision_arguments(parser)

    def handle(self, *args, **options):
        ctx = self.context(options)
        K = options['K']
        contours = parse_contours(options['contours'], K) if options['contours'] else (None, None)
        with self.exit_codes():
            index = MopIndex(n=options['n'], m=options['m'], K=K, contour_n=contours[0], contour_m=contours[1])
            if index.N > 20 and ctx.digits < 100:
                raise CommandError(f"N={index.N} needs at least 100 digits", returncode=CONFIGURATION_ERROR)
            solution = solve_mop(index, ctx, cache=MomentCache())
            polynomials = solution.polynomials()
            atoms = {name: counting_measure(poly, index.N, ctx, K=K).atoms for name, poly in polynomials.items()}
            zeros = {name: [z for z, mult in pairs for _ in range(mult)] for name, pairs in atoms.items()}

        formats = self.formats(options)
        writer = ArtifactWriter(f"solve_{index.label}", self.output_dir(options))
        if 'json' in formats:
            header = {
                'index': {'n': index.n, 'm': index.m, 'K': K,
                          'contour_n': index.contour_n.label, 'contour_m': index.contour_m.label},
                'digits': ctx.digits,
            }
            writer.json('coeffs.json', dict(header, coefficients={
                name: [tagged_complex(c, ctx) for c in poly.coeffs] for name, poly in polynomials.items()
            }))
            writer.json('conditioning.json', dict(
                header,
                exists={'typeI': solution.type_I_exists, 'typeII': solution.type_II_exists},
                conditioning=solution.conditioning.as_dict(ctx),
                conjugation_defect={
                    name: ctx.mp.nstr(conjugation_defect(points, ctx), 5) for name, points in zeros.items() if points
                },
            ))
        if 'csv' in formats:
            writer.zeros_csv('zeros.csv', atoms, ctx)
        if 'svg' in formats:
            writer.overlay_svg('zeros.svg', f"Rescaled zeros, (n,m)=({index.n},{index.m}), K={K}", zeros)

        for name, value in solution.conditioning.residuals.items():
            self.stdout.write(f"{name} orthogonality residual {ctx.mp.nstr(value, 5)}")
        for path in writer.manifest:
            self.stdout.write(f"Wrote {path}")
        if not (solution.type_I_exists and solution.type_II_exists):
            self.stdout.write(self.style.WARNING(f"{index.label}: a system was singular; see the conditioning report"))
        else:
            self.stdout.write(self.style.SUCCESS(f"Solved {index.label}"))
