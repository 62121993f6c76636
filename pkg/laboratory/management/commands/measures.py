import pandas as pd

from laboratory.management.commands._common import LaboratoryCommand, parse_alpha
from laboratory.services.experiments.artifacts import ArtifactWriter, tagged_complex, tagged_number
from laboratory.services.geometry import geometry_for
from laboratory.services.measures import (
    GFunctionSet, balayage_residual, masses, mu_B_measure, mu_measure, period_integrals,
)
from laboratory.services.spectral import SUBCRITICAL


class Command(LaboratoryCommand):
    help = 'Masses, periods, r constants, balayage residual and density profiles for one alpha'

    def add_arguments(self, parser):
        self.add_alpha_argument(parser)
        parser.add_argument('--skip-balayage', action='store_true', help='Do not evaluate the balayage residual')
        self.add_precision_arguments(parser)

    def handle(self, *args, **options):
        ctx = self.context(options)
        alpha = parse_alpha(options['alpha'])
        with self.exit_codes():
            supports = geometry_for(alpha, ctx)
            curve = supports.curve
            gctx = curve.ctx
            result = masses(curve, supports, gctx)
            periods = period_integrals(curve, gctx)
            gset = GFunctionSet(supports)
            r = gset.r_constants()
            measures = [mu_measure(j, supports, gctx) for j in (1, 2, 3)]
            mu_B = mu_B_measure(supports, gctx)
            balayage = None if options['skip_balayage'] else balayage_residual(curve, supports, gctx)

        formats = self.formats(options)
        writer = ArtifactWriter(f"measures_alpha_{options['alpha'].replace('/', '_')}", self.output_dir(options))
        residuals = result.constraint_residuals(curve.alpha)
        if 'json' in formats:
            writer.json('measures.json', {
                'alpha': tagged_number(curve.alpha, gctx),
                'regime': supports.regime,
                'masses': {name: tagged_number(value, gctx) for name, value in result._asdict().items()},
                'mass_residuals': {name: gctx.mp.nstr(value, 5) for name, value in residuals.items()},
                'mu_B_mass': tagged_number(mu_B.total_mass, gctx),
                'mu_B_arcs': {arc: tagged_number(value, gctx) for arc, value in mu_B.arc_masses().items()},
                'c': [tagged_complex(c, gctx) for c in gset.c],
                'r': [tagged_complex(v, gctx) for v in r.as_tuple()],
                'r_spread': gctx.mp.nstr(r.spread, 5),
                'r_imag_defect': gctx.mp.nstr(r.imag_defect, 5),
                'periods': [tagged_complex(v, gctx) for v in periods.values],
                'period_residuals': [gctx.mp.nstr(v, 5) for v in periods.residuals],
                'balayage_residual': None if balayage is None else f"{balayage:.6e}",
            })
        if 'csv' in formats:
            frames = [m.profile().assign(measure=m.name) for m in measures + ([] if supports.regime == SUBCRITICAL else [mu_B])]
            writer.csv('density_profiles.csv', pd.concat(frames, ignore_index=True))

        for name, value in residuals.items():
            self.stdout.write(f"{name}: {gctx.mp.nstr(value, 5)}")
        for path in writer.manifest:
            self.stdout.write(f"Wrote {path}")
        self.stdout.write(self.style.SUCCESS(f"Measures at alpha={options['alpha']} done"))
