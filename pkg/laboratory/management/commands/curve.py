from laboratory.management.commands._common import LaboratoryCommand, parse_alpha
from laboratory.services.experiments.artifacts import ArtifactWriter, tagged_complex, tagged_number
from laboratory.services.spectral import (
    TransitionConstants, discriminant, discriminant_closed_form, find_transition_taus, spectral_curve,
)


class Command(LaboratoryCommand):
    help = 'Spectral curve data for one alpha: branch points, node, regime and transition constants'

    def add_arguments(self, parser):
        self.add_alpha_argument(parser)
        parser.add_argument(
            '--transitions', action='store_true',
            help='Compute tau_c and tau2 by bisection instead of using the reference values',
        )
        self.add_precision_arguments(parser)

    def handle(self, *args, **options):
        ctx = self.context(options)
        alpha = parse_alpha(options['alpha'])
        with self.exit_codes():
            transitions = find_transition_taus(ctx, which=('tau_c', 'tau2')) if options['transitions'] else None
            curve = spectral_curve(alpha, ctx, transitions=transitions)
            closed = discriminant_closed_form(alpha, ctx)
            generic = discriminant(curve.R, curve.D)
            defect = max(abs(c) for c in (generic - closed).coeffs) if not (generic - closed).is_zero else 0

        transitions = transitions or TransitionConstants.reference(ctx)
        writer = ArtifactWriter(f"curve_alpha_{options['alpha'].replace('/', '_')}", self.output_dir(options))
        if 'json' in self.formats(options):
            writer.json('curve.json', {
                'alpha': tagged_number(curve.alpha, ctx),
                'tau': tagged_number(curve.tau, ctx),
                'c': tagged_number(curve.c, ctx),
                'branch_points': {
                    name: tagged_complex(getattr(curve, name), ctx) for name in ('a1', 'b1', 'a2', 'b2')
                },
                'b_star': tagged_number(curve.b_star, ctx),
                'coalescent': curve.coalescent,
                'regime': curve.regime,
                'tau_band': curve.tau_band,
                'transitions': transitions.as_dict(ctx),
                'discriminant_defect': ctx.mp.nstr(defect, 5),
            })
        summary = curve.as_dict(digits=12)
        self.stdout.write(f"regime {summary['regime']}, band {summary['tau_band']}")
        for name, value in summary['branch_points'].items():
            self.stdout.write(f"{name} = {value}")
        for path in writer.manifest:
            self.stdout.write(f"Wrote {path}")
        self.stdout.write(self.style.SUCCESS(f"Curve at alpha={options['alpha']} done"))
