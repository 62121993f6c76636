"""JSON, CSV and SVG outputs of the experiment runner."""
import logging
import os

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt
import pandas as pd
from django.conf import settings

from laboratory.utils.json_io import JSONDataStore, complex_record, decimal_string

logger = logging.getLogger(__name__)

matplotlib.rcParams['svg.hashsalt'] = 'mops-lab'
matplotlib.rcParams['svg.fonttype'] = 'none'

FIGURE_SIZE = (6, 6)
ZERO_COLUMNS = ['re', 'im', 'multiplicity', 'polynomial']
MARKERS = {'P': '*', 'Q': '*', 'A': 'o', 'C': 'o', 'B': 's', 'D': 's'}
ARC_STYLES = {
    'delta1': dict(color='black', linestyle='-.', linewidth=1.2),
    'delta2': dict(color='black', linestyle='--', linewidth=1.0),
    'delta3': dict(color='black', linestyle=':', linewidth=1.4),
    'E_alpha': dict(color='tab:blue', linestyle='-', linewidth=1.2),
}


def tagged_number(value, ctx, digits=None):
    """Decimal string with its precision tag."""
    digits = digits or ctx.digits
    return {'value': decimal_string(value, ctx, digits), 'digits': digits}


def tagged_complex(value, ctx, digits=None):
    digits = digits or ctx.digits
    return dict(complex_record(value, ctx, digits), digits=digits)


class ArtifactWriter:
    """Writes the files of one run under ``<OUTPUT_DIR>/<run name>``; each path is written once."""

    def __init__(self, name, output_dir=None):
        self.directory = os.path.join(str(output_dir or settings.MOPS_LAB['OUTPUT_DIR']), name)
        self.store = JSONDataStore(self.directory)
        self.manifest = []

    def _claim(self, filename):
        path = self.store.resolve(filename)
        if path in self.manifest:
            raise ValueError(f"{path} was already written in this run")
        os.makedirs(os.path.dirname(path), exist_ok=True)
        self.manifest.append(path)
        return path

    def json(self, filename, payload):
        payload = dict(payload, schema_version=settings.MOPS_LAB['SCHEMA_VERSION'])
        return self.store.dump(self._claim(filename), payload)

    def csv(self, filename, frame):
        path = self._claim(filename)
        frame.to_csv(path, index=False, float_format='%.17g')
        logger.info(f"Wrote {filename} ({len(frame)} rows)")
        return path

    def zeros_csv(self, filename, zeros_by_name, ctx):
        """One row per distinct zero; items are (z, multiplicity) atoms or bare values of multiplicity 1."""
        rows = []
        for name, zeros in zeros_by_name.items():
            for item in zeros:
                z, multiplicity = item if isinstance(item, tuple) else (item, 1)
                record = complex_record(z, ctx, ctx.digits)
                rows.append({'re': record['re'], 'im': record['im'], 'multiplicity': multiplicity, 'polynomial': name})
        return self.csv(filename, pd.DataFrame(rows, columns=ZERO_COLUMNS))

    def overlay_svg(self, filename, title, zeros_by_name=None, arcs=None):
        """Zeros and support arcs on shared axes; the data-to-SVG affine map goes into the metadata."""
        path = self._claim(filename)
        fig, ax = plt.subplots(figsize=FIGURE_SIZE)
        for piece, polylines in (arcs or {}).items():
            style = ARC_STYLES.get(piece, dict(color='gray', linewidth=1.0))
            for k, points in enumerate(polylines):
                xs = [complex(z).real for z in points]
                ys = [complex(z).imag for z in points]
                ax.plot(xs, ys, label=piece if k == 0 else None, **style)
        for name, zeros in (zeros_by_name or {}).items():
            xs = [complex(z).real for z in zeros]
            ys = [complex(z).imag for z in zeros]
            ax.scatter(xs, ys, s=14, marker=MARKERS.get(name, 'x'), label=name, zorder=3)
        ax.set_aspect('equal', adjustable='datalim')
        ax.axhline(0, color='lightgray', linewidth=0.5, zorder=0)
        ax.set_title(title)
        if ax.get_legend_handles_labels()[0]:
            ax.legend(loc='upper right', fontsize='small')
        fig.canvas.draw()

        (x0, y0), (x1, y1) = ax.transData.transform([(0, 0), (1, 1)])
        height = fig.get_figheight() * 72
        scale = 72 / fig.dpi
        affine = (
            f"x_svg = {(x1 - x0) * scale:.10g} * re + {x0 * scale:.10g}; "
            f"y_svg = {-(y1 - y0) * scale:.10g} * im + {height - y0 * scale:.10g}"
        )
        fig.savefig(path, format='svg', metadata={'Title': title, 'Description': affine, 'Date': None})
        plt.close(fig)
        logger.info(f"Wrote {filename}")
        return path
