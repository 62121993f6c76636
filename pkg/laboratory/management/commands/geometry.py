import pandas as pd

from laboratory.management.commands._common import LaboratoryCommand, parse_alpha
from laboratory.services.experiments.artifacts import ArtifactWriter, tagged_complex, tagged_number
from laboratory.services.experiments.runner import support_polylines
from laboratory.services.geometry import geometry_for

PIECES = ('delta1', 'delta2', 'delta3', 'E_alpha')


class Command(LaboratoryCommand):
    help = 'Trace Delta2, gamma_L, gamma_R and assemble the supports and E_alpha for one alpha'

    def add_arguments(self, parser):
        self.add_alpha_argument(parser)
        self.add_precision_arguments(parser)

    def handle(self, *args, **options):
        ctx = self.context(options)
        alpha = parse_alpha(options['alpha'])
        with self.exit_codes():
            supports = geometry_for(alpha, ctx)
        gctx = supports.curve.ctx
        arcs = support_polylines(supports, PIECES)

        formats = self.formats(options)
        writer = ArtifactWriter(f"geometry_alpha_{options['alpha'].replace('/', '_')}", self.output_dir(options))
        if 'json' in formats:
            writer.json('geometry.json', {
                'alpha': tagged_number(supports.curve.alpha, gctx),
                'regime': supports.regime,
                'a_star': tagged_number(supports.a_star, gctx),
                'a_B': tagged_complex(supports.a_B, gctx) if supports.a_B is not None else None,
                'arcs': {piece: [[tagged_complex(z, gctx) for z in line] for line in lines] for piece, lines in arcs.items()},
                'omega_boundary': [tagged_complex(z, gctx) for z in supports.omega_boundary],
                'trajectory_defect': gctx.mp.nstr(supports.delta2.trajectory_defect(), 5),
                'meta': {k: gctx.mp.nstr(v, 8) for k, v in supports.meta.items()},
            })
        if 'csv' in formats:
            rows = [
                {'piece': piece, 'line': k, 're': complex(z).real, 'im': complex(z).imag}
                for piece, lines in arcs.items() for k, line in enumerate(lines) for z in line
            ]
            writer.csv('arcs.csv', pd.DataFrame(rows, columns=['piece', 'line', 're', 'im']))
        if 'svg' in formats:
            overlay = dict(arcs)
            if supports.omega_boundary:
                overlay['omega'] = [[complex(z) for z in supports.omega_boundary + supports.omega_boundary[:1]]]
            writer.overlay_svg('supports.svg', f"Supports at alpha={options['alpha']} ({supports.regime})", {}, overlay)

        for path in writer.manifest:
            self.stdout.write(f"Wrote {path}")
        self.stdout.write(self.style.SUCCESS(f"Geometry at alpha={options['alpha']}: {supports.regime}"))
