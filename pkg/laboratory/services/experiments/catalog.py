import logging
from dataclasses import dataclass, field
from fractions import Fraction

from django.conf import settings

from laboratory.exceptions import CatalogError, DomainError
from laboratory.services.moments import RayPairContour
from laboratory.services.mops import MopIndex
from laboratory.utils.json_io import JSONDataStore

logger = logging.getLogger(__name__)

OVERLAY_PIECES = ('delta1', 'delta2', 'delta3', 'E_alpha')


@dataclass(frozen=True)
class FigureSpec:
    """One catalogued figure: zero panels for a list of (n, m), or a support sweep over alphas."""
    figure_id: str
    title: str
    kind: str = 'zeros'
    K: int = 3
    contour_n: RayPairContour = None
    contour_m: RayPairContour = None
    panels: tuple = ()
    polynomials: tuple = ('P', 'A', 'B')
    overlay: tuple = ()
    alphas: tuple = ()
    interlacing: bool = False

    def indices(self):
        return [
            MopIndex(n=n, m=m, K=self.K, contour_n=self.contour_n, contour_m=self.contour_m)
            for n, m in self.panels
        ]

    @property
    def max_N(self):
        return max((n + m for n, m in self.panels), default=0)

    def panel_alphas(self):
        """alpha = n/N of every panel, or the listed alphas for a support sweep."""
        if self.kind == 'supports':
            return list(self.alphas)
        return [Fraction(n, n + m) for n, m in self.panels]


def _contour(entry, K, figure_id):
    if entry is None:
        return None
    try:
        return RayPairContour(K=K, ell=int(entry['ell']), kappa=int(entry['kappa']))
    except (KeyError, TypeError, ValueError, DomainError) as e:
        raise CatalogError(f"bad contour {entry!r}: {e}", figure_id=figure_id)


def _parse_figure(figure_id, entry):
    try:
        kind = entry.get('kind', 'zeros')
        K = int(entry.get('K', 3))
        panels = tuple((int(p['n']), int(p['m'])) for p in entry.get('panels', []))
        overlay = tuple(entry.get('overlay', []))
        spec = FigureSpec(
            figure_id=figure_id,
            title=entry.get('title', figure_id),
            kind=kind,
            K=K,
            contour_n=_contour(entry.get('contour_n'), K, figure_id),
            contour_m=_contour(entry.get('contour_m'), K, figure_id),
            panels=panels,
            polynomials=tuple(entry.get('polynomials', ('P', 'A', 'B'))),
            overlay=overlay,
            alphas=tuple(str(a) for a in entry.get('alphas', [])),
            interlacing=bool(entry.get('interlacing', False)),
        )
    except (AttributeError, KeyError, TypeError, ValueError) as e:
        raise CatalogError(f"malformed entry: {e}", figure_id=figure_id)

    if kind not in ('zeros', 'supports'):
        raise CatalogError(f"unknown figure kind {kind!r}", figure_id=figure_id)
    if kind == 'zeros' and not panels:
        raise CatalogError("zero figure without panels", figure_id=figure_id)
    if kind == 'supports' and not spec.alphas:
        raise CatalogError("support figure without alphas", figure_id=figure_id)
    unknown = [piece for piece in overlay if piece not in OVERLAY_PIECES]
    if unknown:
        raise CatalogError(f"unknown overlay pieces {unknown}", figure_id=figure_id)
    if overlay and K != 3:
        raise CatalogError("support overlays exist only for K=3", figure_id=figure_id)
    try:
        spec.indices()
    except DomainError as e:
        raise CatalogError(str(e), figure_id=figure_id)
    return spec


class FigureCatalog:
    """Figures registered in the JSON catalog named by ``MOPS_LAB['FIGURE_CATALOG']``."""

    def __init__(self, path=None):
        self.path = str(path or settings.MOPS_LAB['FIGURE_CATALOG'])
        payload = JSONDataStore().load(self.path)
        if payload is None or 'figures' not in payload:
            raise CatalogError(f"figure catalog {self.path} is missing or unreadable")
        self.schema_version = payload.get('schema_version')
        self.figures = {figure_id: _parse_figure(figure_id, entry) for figure_id, entry in payload['figures'].items()}
        logger.debug(f"Loaded {len(self.figures)} figures from {self.path}")

    def __contains__(self, figure_id):
        return figure_id in self.figures

    def __iter__(self):
        return iter(sorted(self.figures))

    def get(self, figure_id):
        if figure_id not in self.figures:
            raise CatalogError(f"unknown figure id {figure_id!r}", figure_id=figure_id)
        return self.figures[figure_id]

    def indices(self, max_N=None, K=None):
        """Every distinct MopIndex in the catalog, optionally restricted by N and K."""
        seen = {}
        for spec in self.figures.values():
            if spec.kind != 'zeros' or (K is not None and spec.K != K):
                continue
            for index in spec.indices():
                if max_N is None or index.N <= max_N:
                    seen.setdefault(index.label, index)
        return [seen[label] for label in sorted(seen)]
