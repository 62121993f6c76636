"""Measures mu1, mu2, mu3, mu_B and the functions built on them.

On the real cuts the density is the labelled upper pair difference
(xi_a+ - xi_b+) / (2 pi i), the labels read once per cut from the branch
atlas; on traced arcs it is the slot difference (slot0 - slot1) / (2 pi i)
oriented to be positive. g-functions are
contour integrals of labelled branches from a base point on the real
axis right of the node b_star, along grid routes that avoid
(-inf, b1] and Delta2.
"""
import logging
import math
import threading
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
import pandas as pd
from django.conf import settings

from laboratory.exceptions import BranchLabelError, ConvergenceError, DomainError, RegimeError
from laboratory.services.geometry import BranchAtlas, chord_integrals
from laboratory.services.mops import varying_weight_polynomial
from laboratory.services.numerics import Polyline, Segment, adaptive_quadrature, gauss_legendre_rule
from laboratory.services.numerics.paths import crosses_any, point_segment_distances
from laboratory.services.numerics.planning import CutAvoidingPlanner
from laboratory.services.numerics.quadrature import integrate_piece
from laboratory.services.spectral import SUBCRITICAL, XiTriple, anchor_triple, cubic_roots, match_roots, ordering_rules

logger = logging.getLogger(__name__)

ATOM_ORDER = 16
PANEL_LENGTH = 0.05
NEAR_FACTOR = 2
WARN_FACTOR = 10
WALK_FACTOR = 0.05
BALAYAGE_SAMPLES = 50
BALAYAGE_OFFSET = 1e-5
ENDPOINT_MARGIN = 0.02
PHI_BASE_OFFSET = 1e-6
RICHARDSON_RADII = (1000, 2000, 4000)
R_TOLERANCE = 1e-8
SAMPLE_CLEARANCE = 0.2
H_SIDE_OFFSET = 1e-3
LOOP_VERTICES = 64
FAR_LEFT = -1e6

PHI_PAIRS = {1: (0, 1), 2: (0, 2), 3: (2, 1)}
GAP_PAIRS = {'delta1': (0, 1), 'delta3': (2, 1)}


def _two_pi_i(mp):
    return mp.mpc(0, 2 * mp.pi)


def _is_branch(z, curve, ctx):
    return any(abs(z - p) <= ctx.tol(4) for p in curve.branch_points)


def _singular_distance(z, curve):
    return min(abs(z - p) for p in curve.singular_points)


def _double_value(point, curve):
    """Common value of the merging pair at a simple branch point."""
    return 3 * curve.D(point) / (2 * curve.R(point))


def gap_density(x, curve, ctx, upper_sign=1):
    """(xi_a+ - xi_b+) / (2 pi i) at a real point of a real cut.

    The upper values xi_a+, xi_b+ are the complex pair at x, conjugate to
    each other; xi_a+ is the member whose imaginary part has sign
    ``upper_sign``. The pair never meets inside the cut, so one sign
    labels the whole cut.
    """
    mp = ctx.mp
    roots = sorted(cubic_roots(curve.R(x), curve.D(x), ctx), key=lambda r: abs(r.imag))
    first, second = roots[1], roots[2]
    if first.imag * upper_sign < 0:
        first, second = second, first
    return (first - second) / _two_pi_i(mp)


def gap_upper_sign(supports, arc, ctx, atlas=None):
    """Sign of Im xi_a+ at the middle of the real cut ``arc``, a the first slot of its pair."""
    mp = ctx.mp
    lo, hi = (mp.mpf(v) for v in getattr(supports, arc))
    atlas = atlas or BranchAtlas(supports, ctx)
    upper = atlas.boundary_values(mp.mpc((lo + hi) / 2), mp.mpc(0, 1))
    return 1 if upper.xi[GAP_PAIRS[arc][0]].imag > 0 else -1


class GapDensity:
    def __init__(self, curve, ctx, upper_sign=1):
        self.curve = curve
        self.ctx = ctx
        self.upper_sign = upper_sign

    def __call__(self, s):
        return gap_density(self.ctx.mp.mpf(s.real), self.curve, self.ctx, self.upper_sign)


class ChordDensity:
    """dmu/ds on one chord of a traced arc, from the slot values at its ends.

    Roots at s are matched to an interpolation of the end values (with a
    square-root profile toward an end at a branch point) and the pair
    difference over 2 pi i is returned, times ``sign``.
    """

    def __init__(self, a, roots_a, b, roots_b, curve, ctx, branch_a=False, branch_b=False, sign=1):
        self.a, self.b = a, b
        self.roots_a, self.roots_b = tuple(roots_a), tuple(roots_b)
        self.curve = curve
        self.ctx = ctx
        self.branch_a, self.branch_b = branch_a, branch_b
        self.sign = sign

    def with_sign(self, sign):
        return ChordDensity(
            self.a, self.roots_a, self.b, self.roots_b, self.curve, self.ctx,
            branch_a=self.branch_a, branch_b=self.branch_b, sign=sign,
        )

    def _predicted(self, s):
        mp = self.ctx.mp
        d = self.b - self.a
        t = ((s - self.a) * d.conjugate()).real / abs(d) ** 2
        t = min(max(t, mp.mpf(0)), mp.mpf(1))
        ra, rb = self.roots_a, self.roots_b
        third = ra[2] + (rb[2] - ra[2]) * t
        if self.branch_a:
            w = mp.sqrt(t)
            pair = [ra[k] + (rb[k] - ra[k]) * w for k in (0, 1)]
        elif self.branch_b:
            w = mp.sqrt(1 - t)
            pair = [rb[k] + (ra[k] - rb[k]) * w for k in (0, 1)]
        else:
            pair = [ra[k] + (rb[k] - ra[k]) * t for k in (0, 1)]
        return pair + [third]

    def roots(self, s):
        found = cubic_roots(self.curve.R(s), self.curve.D(s), self.ctx)
        matched = match_roots(self._predicted(s), found, self.ctx)
        if matched is None:
            raise BranchLabelError("density slots could not be matched on the chord", point=complex(s))
        return matched

    def __call__(self, s):
        roots = self.roots(s)
        return self.sign * (roots[0] - roots[1]) / _two_pi_i(self.ctx.mp)


class MirroredDensity:
    """s -> conj(inner(conj s)): the density on the reflected arc."""

    def __init__(self, inner):
        self.inner = inner

    def __call__(self, s):
        return self.inner(s.conjugate()).conjugate()


@dataclass(frozen=True)
class DensityPanel:
    start: object
    end: object
    density: object
    arc: str
    kind: str = 'arc'
    singular_start: bool = False
    singular_end: bool = False
    sign: int = 1

    @property
    def segment(self):
        return Segment(self.start, self.end)

    @property
    def length(self):
        return abs(self.end - self.start)

    def mirrored(self, arc=None):
        return replace(
            self, start=self.start.conjugate(), end=self.end.conjugate(),
            density=MirroredDensity(self.density), arc=arc or self.arc,
        )


def _substitutions(panel, ctx, order):
    """Quadrature points t in (0, 1) and weights, graded at singular ends."""
    mp = ctx.mp
    nodes, weights = gauss_legendre_rule(order, ctx)
    half = mp.mpf(1) / 2
    out = []
    for x, w in zip(nodes, weights):
        u = (x + 1) / 2
        w = w / 2
        if panel.singular_start and panel.singular_end:
            out.append((half * u * u, w * u))
            out.append((1 - half * (1 - u) ** 2, w * (1 - u)))
        elif panel.singular_start:
            out.append((u * u, w * 2 * u))
        elif panel.singular_end:
            out.append((1 - (1 - u) ** 2, w * 2 * (1 - u)))
        else:
            out.append((u, w))
    return out


class DiscretizedMeasure:
    """A measure on real intervals and traced arcs, as panels with fixed quadrature atoms.

    Each atom is (s, w, panel index, density) with w = sign * density(s) ds
    times the quadrature weight; on the true support w is real and
    positive for unsigned panels.
    """

    def __init__(self, name, panels, ctx, order=ATOM_ORDER):
        self.name = name
        self.panels = tuple(panels)
        self.ctx = ctx
        self.order = order
        self._atoms = None
        self._lock = threading.Lock()

    def __len__(self):
        return len(self.panels)

    @property
    def signed(self):
        return any(p.sign < 0 for p in self.panels)

    @property
    def atoms(self):
        with self._lock:
            if self._atoms is None:
                atoms = []
                for k, panel in enumerate(self.panels):
                    d = panel.end - panel.start
                    for t, w in _substitutions(panel, self.ctx, self.order):
                        s = panel.start + d * t
                        density = panel.density(s)
                        atoms.append((s, panel.sign * w * d * density, k, density))
                self._atoms = atoms
                logger.debug(f"measure {self.name}: {len(atoms)} atoms on {len(self.panels)} panels")
            return self._atoms

    @property
    def total_mass(self):
        return self.ctx.mp.fsum(w.real for _, w, _, _ in self.atoms)

    def arc_masses(self):
        masses = {}
        for _, w, k, _ in self.atoms:
            arc = self.panels[k].arc
            masses[arc] = masses.get(arc, 0) + w.real
        return masses

    def mass_by_quadrature(self):
        mp = self.ctx.mp
        total = mp.mpf(0)
        for panel in self.panels:
            value = integrate_piece(
                panel.density, panel.segment, self.ctx,
                singular_start=panel.singular_start, singular_end=panel.singular_end, tol=self.ctx.tol(4),
            )
            total += panel.sign * value.real
        return total

    def combined(self, other, name, sign=1):
        panels = self.panels + tuple(replace(p, sign=p.sign * sign) for p in other.panels)
        return DiscretizedMeasure(name, panels, self.ctx, order=self.order)

    def imag_ratio(self):
        """max |Im| / |Re| of the panel totals, end panels of each arc excluded."""
        mp = self.ctx.mp
        totals = {}
        for _, w, k, _ in self.atoms:
            totals[k] = totals.get(k, 0) + w
        interior = []
        for k, panel in enumerate(self.panels):
            first = k == 0 or self.panels[k - 1].arc != panel.arc
            last = k == len(self.panels) - 1 or self.panels[k + 1].arc != panel.arc
            if not (first or last) and abs(totals[k].real) > 0:
                interior.append(abs(totals[k].imag) / abs(totals[k].real))
        return max(interior, default=mp.mpf(0))

    def min_density(self):
        """Smallest sign-adjusted density along the panels (negative means a sign flip)."""
        mp = self.ctx.mp
        values = []
        for _, w, k, _ in self.atoms:
            values.append(w.real * self.panels[k].sign)
        return min(values, default=mp.mpf(0))

    def segments(self):
        starts = [complex(p.start) for p in self.panels]
        ends = [complex(p.end) for p in self.panels]
        return starts, ends

    def distance(self, z):
        starts, ends = self.segments()
        if not starts:
            return np.inf
        return float(point_segment_distances([complex(z)], starts, ends).min())

    def near_panels(self, z, factor=NEAR_FACTOR):
        starts, ends = self.segments()
        if not starts:
            return []
        distances = point_segment_distances([complex(z)], starts, ends)[0]
        lengths = np.abs(np.array(ends) - np.array(starts))
        return [int(k) for k in np.flatnonzero(distances < factor * lengths)]

    def arc_groups(self):
        groups = {}
        for k, panel in enumerate(self.panels):
            if panel.kind == 'arc':
                groups.setdefault(panel.arc, []).append(k)
        return groups

    def profile(self):
        """One row per atom: arc, position, signed density w.r.t. arclength along the panel."""
        rows = []
        for s, _, k, density in self.atoms:
            panel = self.panels[k]
            d = panel.end - panel.start
            rows.append({
                'arc': panel.arc,
                're': float(s.real),
                'im': float(s.imag),
                'density': float((density * d / abs(d)).real) * panel.sign,
            })
        return pd.DataFrame(rows, columns=['arc', 're', 'im', 'density'])


def _interval_panels(supports, arc, ctx):
    mp = ctx.mp
    curve = supports.curve
    lo, hi = (mp.mpf(v) for v in getattr(supports, arc))
    count = max(1, int(math.ceil(float(hi - lo) / PANEL_LENGTH)))
    edges = [lo + (hi - lo) * k / count for k in range(count + 1)]
    density = GapDensity(curve, ctx, gap_upper_sign(supports, arc, ctx))
    panels = []
    for k in range(count):
        panels.append(DensityPanel(
            start=mp.mpc(edges[k]), end=mp.mpc(edges[k + 1]), density=density, arc=arc, kind='real',
            singular_start=k == 0 and _is_branch(lo, curve, ctx),
            singular_end=k == count - 1 and _is_branch(hi, curve, ctx),
        ))
    return panels


def _arc_panels(arc, name, curve, ctx, stop=None):
    """Panels along the chords of a traced arc, oriented so the density is positive.

    With ``stop`` the arc is cut at the chord point nearest to it.
    """
    mp = ctx.mp
    nodes = list(arc.nodes)
    payloads = list(arc.payloads)
    last = len(nodes) - 1
    end_point = None
    if stop is not None:
        starts = [complex(z) for z in nodes[:-1]]
        ends = [complex(z) for z in nodes[1:]]
        last = int(np.argmin(point_segment_distances([complex(stop)], starts, ends)[0])) + 1
        end_point = mp.mpc(stop)

    densities = []
    for k in range(last):
        a, b = nodes[k], nodes[k + 1]
        if a == b:
            continue
        branch_a, branch_b = _is_branch(a, curve, ctx), _is_branch(b, curve, ctx)
        pa = None if branch_a else payloads[k]
        pb = None if branch_b else payloads[k + 1]
        if pa is None and pb is None:
            raise BranchLabelError(f"chord of {name} has no slot data at either end", point=complex(a))
        if pa is None:
            xi0 = _double_value(a, curve)
            roots_a = (xi0, xi0, -2 * xi0)
        else:
            roots_a = pa.roots
        if pb is None:
            xi0 = _double_value(b, curve)
            roots_b = (xi0, xi0, -2 * xi0)
        else:
            roots_b = pb.roots
        density = ChordDensity(a, roots_a, b, roots_b, curve, ctx, branch_a=branch_a, branch_b=branch_b)
        end = end_point if (end_point is not None and k == last - 1) else b
        densities.append((a, end, density, branch_a, branch_b and end is b))
    if not densities:
        return []

    a, b, density, _, _ = densities[len(densities) // 2]
    orientation = 1 if (density((a + b) / 2) * (b - a)).real > 0 else -1
    return [
        DensityPanel(
            start=a, end=b, density=density.with_sign(orientation), arc=name,
            singular_start=branch_a, singular_end=branch_b,
        )
        for a, b, density, branch_a, branch_b in densities
    ]


def delta2_panels(supports, ctx):
    lower = _arc_panels(supports.delta2_lower, 'delta2_lower', supports.curve, ctx)
    upper = [panel.mirrored(arc='delta2_upper') for panel in lower]
    return lower, upper


def mu_measure(j, supports, ctx):
    """mu1 on Delta1, mu2 on Delta2 or mu3 on Delta3 (empty below tau_c)."""
    if j == 1:
        return DiscretizedMeasure('mu1', _interval_panels(supports, 'delta1', ctx), ctx)
    if j == 2:
        lower, upper = delta2_panels(supports, ctx)
        return DiscretizedMeasure('mu2', lower + upper, ctx)
    if j == 3:
        panels = _interval_panels(supports, 'delta3', ctx) if supports.delta3 else []
        return DiscretizedMeasure('mu3', panels, ctx)
    raise DomainError(f"measure index must be 1, 2 or 3, got {j}", value=j)


def mu_B_measure(supports, ctx):
    """mu_B on E_alpha: mu2 on the Delta2 pieces outside Omega_alpha, (xi2 - xi3)/(2 pi i) on gamma_L, gamma_R."""
    curve = supports.curve
    lower, upper = delta2_panels(supports, ctx)
    if supports.regime == SUBCRITICAL:
        return DiscretizedMeasure('mu_B', lower + upper, ctx)
    if supports.gamma_R is None:
        raise RegimeError("E_alpha has not been assembled", alpha=float(curve.alpha))
    panels = list(upper)
    if supports.a_B is not None:
        panels += _arc_panels(supports.delta2_lower, 'delta2_outside', curve, ctx, stop=supports.a_B)
        panels += _arc_panels(supports.gamma_L, 'gamma_L', curve, ctx)
    panels += _arc_panels(supports.gamma_R, 'gamma_R', curve, ctx)
    return DiscretizedMeasure('mu_B', panels, ctx)


class Masses(NamedTuple):
    mu1: object
    mu2: object
    mu3: object

    def constraint_residuals(self, alpha):
        return {
            'mu1+mu2=1': abs(self.mu1 + self.mu2 - 1),
            'mu1+mu3=alpha': abs(self.mu1 + self.mu3 - alpha),
            'mu2-mu3=1-alpha': abs(self.mu2 - self.mu3 - (1 - alpha)),
        }


def _interval_mass(supports, arc, ctx, atlas=None):
    mp = ctx.mp
    curve = supports.curve
    lo, hi = (mp.mpf(v) for v in getattr(supports, arc))
    upper_sign = gap_upper_sign(supports, arc, ctx, atlas=atlas)
    value = adaptive_quadrature(
        lambda x: gap_density(x.real, curve, ctx, upper_sign), Segment(lo, hi), ctx,
        singular_start=_is_branch(lo, curve, ctx), singular_end=_is_branch(hi, curve, ctx), tol=ctx.tol(4),
    )
    return value.real


def masses(curve, supports, ctx):
    """(|mu1|, |mu2|, |mu3|): real cuts by quadrature, |mu2| from the level along Delta2."""
    mp = ctx.mp
    atlas = BranchAtlas(supports, ctx)
    mu1 = _interval_mass(supports, 'delta1', ctx, atlas=atlas)
    mu3 = _interval_mass(supports, 'delta3', ctx, atlas=atlas) if supports.delta3 else mp.mpf(0)
    mu2 = supports.mu2_mass()
    result = Masses(mu1=mu1, mu2=mu2, mu3=mu3)
    worst = max(result.constraint_residuals(curve.alpha).values())
    logger.info(f"masses at alpha={mp.nstr(curve.alpha, 8)}: worst constraint residual {mp.nstr(worst, 3)}")
    return result


def _panel_at(panels, s, ctx, tolerance=1e-3):
    if not panels:
        return None
    starts = [complex(p.start) for p in panels]
    ends = [complex(p.end) for p in panels]
    distances = point_segment_distances([complex(s)], starts, ends)[0]
    k = int(np.argmin(distances))
    return panels[k] if distances[k] <= tolerance else None


def _reject_branch_points(s, curve, ctx):
    mp = ctx.mp
    for p in curve.branch_points:
        if abs(s - p) < ctx.tol(4):
            raise DomainError(f"s={mp.nstr(s, 10)} is a branch point; use endpoint-adapted quadrature", value=s)


def density_mu(j, s, supports, ctx):
    """Density of mu_j at s with respect to the complex line element.

    On the real cuts the density is the labelled upper pair difference
    over 2 pi i, real up to rounding; on Delta2 it is
    (xi1 - xi3)/(2 pi i) with the sign that makes density * ds positive
    for Delta2 oriented from a2 to b2.
    """
    mp = ctx.mp
    curve = supports.curve
    s = mp.mpc(s)
    _reject_branch_points(s, curve, ctx)
    if j in (1, 3):
        interval = supports.delta1 if j == 1 else supports.delta3
        if interval is None:
            return mp.mpc(0)
        lo, hi = interval
        if abs(s.imag) > ctx.tol(8) or not lo < s.real < hi:
            raise DomainError(f"s={mp.nstr(s, 10)} is not interior to Delta{j}", value=s)
        arc = f"delta{j}"
        return gap_density(s.real, curve, ctx, gap_upper_sign(supports, arc, ctx))
    if j == 2:
        lower, upper = delta2_panels(supports, ctx)
        panel = _panel_at(lower + upper, s, ctx)
        if panel is None:
            raise DomainError(f"s={mp.nstr(s, 10)} is not on Delta2", value=s)
        value = panel.density(s)
        forward = (panel.end - panel.start) if panel.arc == 'delta2_lower' else (panel.start - panel.end)
        return value if (value * forward).real > 0 else -value
    raise DomainError(f"measure index must be 1, 2 or 3, got {j}", value=j)


def density_mu_B(s, supports, ctx):
    """Density of mu_B at s on E_alpha, w.r.t. arclength along the piece containing s."""
    mp = ctx.mp
    s = mp.mpc(s)
    _reject_branch_points(s, supports.curve, ctx)
    if supports.regime == SUBCRITICAL:
        return density_mu(2, s, supports, ctx)
    panel = _panel_at(mu_B_measure(supports, ctx).panels, s, ctx)
    if panel is None:
        raise DomainError(f"s={mp.nstr(s, 10)} lies on no piece of E_alpha", value=s)
    return panel.density(s)


def _cut_direction(z, panels):
    """Unit direction of a ray from z that crosses none of ``panels``."""
    zf = complex(z)
    starts = np.array([complex(p.start) for p in panels])
    ends = np.array([complex(p.end) for p in panels])
    distances = point_segment_distances([zf], starts, ends)[0]
    k = int(np.argmin(distances))
    d = ends[k] - starts[k]
    t = np.clip(((zf - starts[k]) * np.conj(d)).real / max(abs(d) ** 2, 1e-300), 0.0, 1.0)
    away = zf - (starts[k] + t * d)
    candidates = []
    if abs(away) > 0:
        candidates.append(away / abs(away))
    candidates += [np.exp(2j * np.pi * k / 16) for k in range(16)]
    reach = 4 * float(settings.MOPS_LAB['BOUNDING_BOX']) + abs(zf)
    for direction in candidates:
        if not crosses_any(zf + 1e-9 * direction, zf + reach * direction, starts, ends):
            return direction
    logger.warning(f"every ray from {zf} meets the arc; potential may carry a 2 pi jump")
    return candidates[0]


def _log_kernel(z, direction, panel, mp):
    if panel.kind == 'real':
        return lambda s: mp.mpc(mp.log(abs(s - z)))
    return lambda s: mp.log(-(s - z) / direction)


def potential_U(measure, z, ctx, refine=True):
    """U(z) = integral of log 1/|s - z| d measure.

    Arcs are integrated along their chords with a branch of log(s - z)
    whose cut avoids the arc, which is exact for the traced level curves.
    Panels close to z are integrated adaptively when ``refine`` is set.
    """
    mp = ctx.mp
    z = mp.mpc(z)
    directions = {
        arc: mp.mpc(_cut_direction(z, [measure.panels[k] for k in indices]))
        for arc, indices in measure.arc_groups().items()
    }
    near = set(measure.near_panels(z)) if refine else set()
    if not refine and measure.near_panels(z, factor=WARN_FACTOR):
        logger.warning(f"potential of {measure.name} evaluated within {WARN_FACTOR} mesh widths of its support")
    kernels = {}
    total = mp.mpf(0)
    for s, w, k, _ in measure.atoms:
        if k in near:
            continue
        panel = measure.panels[k]
        if k not in kernels:
            kernels[k] = _log_kernel(z, directions.get(panel.arc), panel, mp)
        total += (kernels[k](s) * w).real
    for k in near:
        panel = measure.panels[k]
        kernel = _log_kernel(z, directions.get(panel.arc), panel, mp)
        value = integrate_piece(
            lambda s: kernel(s) * panel.density(s), panel.segment, ctx, graded_at=z, tol=ctx.tol(4),
        )
        total += panel.sign * value.real
    return -total


def cauchy_C(measure, z, ctx, refine=True):
    """C(z) = integral of d measure(s) / (s - z)."""
    mp = ctx.mp
    z = mp.mpc(z)
    near = set(measure.near_panels(z)) if refine else set()
    if not refine and measure.near_panels(z, factor=WARN_FACTOR):
        logger.warning(f"Cauchy transform of {measure.name} evaluated within {WARN_FACTOR} mesh widths of its support")
    total = mp.mpc(0)
    for s, w, k, _ in measure.atoms:
        if k not in near:
            total += w / (s - z)
    for k in near:
        panel = measure.panels[k]
        value = integrate_piece(lambda s: panel.density(s) / (s - z), panel.segment, ctx, graded_at=z, tol=ctx.tol(4))
        total += panel.sign * value
    return total


def mean_value_residual(measure, z, ctx, radius=1e-2):
    """|U(z) - average of U at the four points z + radius i^k|."""
    mp = ctx.mp
    z = mp.mpc(z)
    ring = [potential_U(measure, z + radius * mp.mpc(0, 1) ** k, ctx) for k in range(4)]
    return abs(potential_U(measure, z, ctx) - mp.fsum(ring) / 4)


def walk_integrals(z0, triple, z1, curve, ctx):
    """Integrals of the three labelled branches along [z0, z1] and the labels at z1."""
    mp = ctx.mp
    z = mp.mpc(z0)
    z1 = mp.mpc(z1)
    roots = tuple(triple.xi)
    sums = [mp.mpc(0)] * 3
    while z != z1:
        remaining = z1 - z
        distance = abs(remaining)
        h = min(distance, WALK_FACTOR * max(1, abs(z)), _singular_distance(z, curve) / 4)
        if h < ctx.tol(4) * max(1, abs(z)):
            raise BranchLabelError("integration path runs into a singular point", point=complex(z))
        z_next = z1 if h >= distance else z + remaining / distance * h
        pieces, roots = chord_integrals(z, roots, z_next, curve, ctx)
        sums = [a + b for a, b in zip(sums, pieces)]
        z = z_next
    return tuple(sums), XiTriple(z=z1, xi=roots)


def real_axis_triple(x, curve, ctx):
    """Labelled branches at a real x > b1 other than b_star, from the real orderings."""
    mp = ctx.mp
    x = mp.mpf(x)
    for lower, upper, order in ordering_rules(curve):
        if lower < x < upper:
            values = sorted(r.real for r in cubic_roots(curve.R(x), curve.D(x), ctx))
            xi = [None] * 3
            for rank, j in enumerate(order):
                xi[j] = mp.mpc(values[rank])
            return XiTriple(z=mp.mpc(x), xi=tuple(xi))
    raise DomainError(f"x={mp.nstr(x, 10)} is not in a cut-free real interval right of b1", value=x)


def _axis_knots(lo, hi):
    knots = [lo]
    step = max(abs(lo), 1)
    while knots[-1] + step < hi:
        knots.append(knots[-1] + step)
        step *= 2
    return knots + [hi]


def axis_integral(j, lo, hi, curve, ctx):
    """Integral of xi_j over [lo, hi] inside [b1, infinity), split at b_star."""
    mp = ctx.mp
    lo, hi = mp.mpf(lo), mp.mpf(hi)
    breaks = [lo] + [b for b in (mp.mpf(curve.b_star),) if lo < b < hi] + [hi]
    total = mp.mpc(0)
    for a, b in zip(breaks[:-1], breaks[1:]):
        path = Polyline(tuple(_axis_knots(a, b)))
        total += adaptive_quadrature(
            lambda x: real_axis_triple(x.real, curve, ctx).xi[j], path, ctx,
            singular_start=abs(a - curve.b1) <= ctx.tol(4),
        )
    return total


class RConstants(NamedTuple):
    r1: object
    r2: object
    r3: object
    spread: object
    imag_defect: object

    def as_tuple(self):
        return (self.r1, self.r2, self.r3)


class GFunctionSet:
    """g1, g2, g3 with their constants c_j and r_j.

    Values are base values at x0 = b_star + 1 plus integrals of the
    labelled branches along routes avoiding (-inf, b1] and Delta2. In that
    domain all three g's and the Phi functions are single-valued; route
    integrals are memoized per grid node, first writer wins.
    """

    def __init__(self, supports, ctx=None, spacing=0.25):
        self.supports = supports
        self.curve = supports.curve
        self.ctx = ctx or self.curve.ctx
        mp = self.ctx.mp
        curve = self.curve
        self.alpha = curve.alpha
        self.x0 = mp.mpf(curve.b_star) + 1
        starts, ends = supports.segments(('delta2',))
        cuts = [(complex(curve.b1), complex(FAR_LEFT))] + list(zip(starts, ends))
        self.planner = CutAvoidingPlanner(
            cuts, curve.singular_points, sink_radius=float(curve.label_radius), spacing=spacing,
            source=complex(self.x0),
        )
        self._memo = {}
        self._lock = threading.Lock()
        self._r = None

        mu2 = supports.mu2_mass()
        c12 = mp.mpc(0, -mp.pi * mu2)
        self.c = (c12, c12, self._c3())
        tail = [axis_integral(j, curve.b1, self.x0, curve, self.ctx) for j in range(3)]
        self.base = (
            tail[0] + self.c[0],
            tail[1] + self.c[1],
            self._xi3_left_of_b1() + tail[2] + self.c[2],
        )
        logger.info(f"g-functions ready at alpha={mp.nstr(self.alpha, 8)}, base point x0={mp.nstr(self.x0, 8)}")

    def _gap_pieces(self):
        """(lo, hi, singular_end) pieces of [a_star, b1] separated at a1 when a_star < a1."""
        curve, a_star = self.curve, self.supports.a_star
        if a_star < curve.a1:
            return [(a_star, curve.a1, True), (curve.a1, curve.b1, True)]
        return [(a_star, curve.b1, True)]

    def _c3(self):
        """-integral of xi1(-) over [a_star, b1]."""
        mp, ctx, curve = self.ctx.mp, self.ctx, self.curve
        tiny = ctx.tol(4)

        def xi1_minus(x):
            roots = cubic_roots(curve.R(x), curve.D(x), ctx)
            lower = [r for r in roots if r.imag < -tiny]
            if lower:
                return lower[0]
            return min(roots, key=lambda r: r.real)

        total = mp.mpc(0)
        for lo, hi, singular_end in self._gap_pieces():
            total += adaptive_quadrature(
                xi1_minus, Segment(mp.mpf(lo), mp.mpf(hi)), ctx,
                singular_start=_is_branch(lo, curve, ctx), singular_end=singular_end,
            )
        return -total

    def _xi3_left_of_b1(self):
        """Integral of xi3 over [a_star, b1]: the real root on the cut, the largest root in the gap."""
        mp, ctx, curve = self.ctx.mp, self.ctx, self.curve
        tiny = ctx.tol(4)

        def xi3(x):
            roots = cubic_roots(curve.R(x), curve.D(x), ctx)
            if any(abs(r.imag) > tiny for r in roots):
                return mp.mpc(min(roots, key=lambda r: abs(r.imag)).real)
            return mp.mpc(max(r.real for r in roots))

        total = mp.mpc(0)
        for lo, hi, _ in self._gap_pieces():
            total += adaptive_quadrature(xi3, Segment(mp.mpf(lo), mp.mpf(hi)), ctx)
        return total

    def _node_point(self, k):
        nodes, _ = self.planner.tree
        if k == len(nodes) - 1:
            return self.ctx.mp.mpc(self.x0)
        return self.ctx.mp.mpc(complex(nodes[k]))

    def _node_data(self, k):
        with self._lock:
            if k in self._memo:
                return self._memo[k]
        chain = self.planner.chain(k)
        start, data = 0, None
        with self._lock:
            for position in range(len(chain) - 1, -1, -1):
                if chain[position] in self._memo:
                    start, data = position, self._memo[chain[position]]
                    break
        if data is None:
            mp = self.ctx.mp
            data = ((mp.mpc(0),) * 3, real_axis_triple(self.x0, self.curve, self.ctx))
            with self._lock:
                data = self._memo.setdefault(chain[0], data)
        for position in range(start, len(chain) - 1):
            sums, triple = walk_integrals(
                self._node_point(chain[position]), data[1], self._node_point(chain[position + 1]), self.curve, self.ctx,
            )
            data = (tuple(a + b for a, b in zip(data[0], sums)), triple)
            with self._lock:
                data = self._memo.setdefault(chain[position + 1], data)
        return data

    def integrals(self, z):
        """Integrals of xi1, xi2, xi3 from x0 to z and the labelled triple at z."""
        z = self.ctx.mp.mpc(z)
        k = self.planner.entry_node(complex(z))
        sums, triple = self._node_data(k)
        extra, triple = walk_integrals(self._node_point(k), triple, z, self.curve, self.ctx)
        return tuple(a + b for a, b in zip(sums, extra)), triple

    def _check_domain(self, z):
        mp = self.ctx.mp
        if abs(z.imag) <= self.ctx.tol(8) and z.real <= self.curve.b1:
            raise DomainError(f"z={mp.nstr(z, 10)} lies on (-inf, b1]; pass a side for boundary values", value=z)

    def values(self, z, side=None):
        """(g1, g2, g3) at z; with ``side`` the boundary values at z seen from z + 0*side."""
        mp = self.ctx.mp
        z = mp.mpc(z)
        if side is None:
            self._check_domain(z)
            sums, _ = self.integrals(z)
            return tuple(b + s for b, s in zip(self.base, sums))
        normal = mp.mpc(side) / abs(mp.mpc(side))
        step = self.ctx.tol(8) * normal
        sums, triple = self.integrals(z + step)
        return tuple(b + s - step * x for b, s, x in zip(self.base, sums, triple.xi))

    def xi(self, z):
        return self.integrals(z)[1]

    def g(self, z, j, side=None):
        if j not in (1, 2, 3):
            raise DomainError(f"g index must be 1, 2 or 3, got {j}", value=j)
        return self.values(z, side=side)[j - 1]

    def _axis_value(self, j, X, start=None):
        start = start or (self.x0, self.base[j])
        x, value = start
        return value + axis_integral(j, x, X, self.curve, self.ctx)

    def r_constants(self, radii=RICHARDSON_RADII):
        """r1, r2, r3 from the expansions at infinity, with two Richardson steps.

        Raises ConvergenceError when the first-level extrapolants disagree
        by more than the tolerance.
        """
        if self._r is not None and radii == RICHARDSON_RADII:
            return self._r
        mp = self.ctx.mp
        alpha = self.alpha
        corrections = (
            lambda X: -2 * X ** 3 / 3 + mp.log(X),
            lambda X: X ** 3 / 3 - alpha * mp.log(X),
            lambda X: X ** 3 / 3 - (1 - alpha) * mp.log(X),
        )
        estimates, spreads = [], []
        for j in range(3):
            point = (self.x0, self.base[j])
            samples = []
            for X in radii:
                X = mp.mpf(X)
                value = self._axis_value(j, X, start=point)
                point = (X, value)
                samples.append(value + corrections[j](X))
            first = [2 * samples[1] - samples[0], 2 * samples[2] - samples[1]]
            spreads.append(abs(first[1] - first[0]))
            estimates.append((4 * first[1] - first[0]) / 3)
        spread = max(spreads)
        if spread > R_TOLERANCE:
            logger.error(f"r-constant extrapolation spread {mp.nstr(spread, 3)}")
            raise ConvergenceError("Richardson extrapolation of r did not settle", best=estimates, residual=spread)
        imag_defect = max(abs((r - c).imag) for r, c in zip(estimates, self.c))
        result = RConstants(r1=estimates[0], r2=estimates[1], r3=estimates[2], spread=spread, imag_defect=imag_defect)
        if radii == RICHARDSON_RADII:
            self._r = result
        return result


def g_function(z, j, gset, side=None):
    return gset.g(z, j, side=side)


def r_constants(gset, radii=RICHARDSON_RADII):
    return gset.r_constants(radii=radii)


class PhiSet:
    """Phi1, Phi2, Phi3 on C minus ((-inf, b1] and Delta2).

    Values come from the g-identities; ``direct`` integrates the branch
    difference from the base point of each Phi for spot checks.
    """

    def __init__(self, gset):
        self.gset = gset
        self.supports = gset.supports
        self.curve = gset.curve
        self.ctx = gset.ctx
        mp = self.ctx.mp
        self.subcritical = self.supports.a_star < self.curve.a1
        if self.subcritical:
            gap = adaptive_quadrature(
                lambda x: self._gap_difference(x), Segment(mp.mpf(self.supports.a_star), mp.mpf(self.curve.a1)),
                self.ctx, singular_end=True,
            )
            self.extra = gap + gset.c[1]
        else:
            self.extra = mp.mpc(0)

    def _gap_difference(self, x):
        """xi1 - xi2 on the real gap (a_star, a1): smallest minus middle root."""
        values = sorted(r.real for r in cubic_roots(self.curve.R(x), self.curve.D(x), self.ctx))
        return self.ctx.mp.mpc(values[0] - values[1])

    def __call__(self, z, j, side=None):
        mp = self.ctx.mp
        g1, g2, g3 = self.gset.values(z, side=side)
        two_pi_i = _two_pi_i(mp)
        if j == 1:
            return g1 - g2
        if j == 2:
            return g1 - g3 + two_pi_i
        if j == 3:
            return g3 - g2 - two_pi_i * self.curve.alpha + self.extra
        raise DomainError(f"Phi index must be 1, 2 or 3, got {j}", value=j)

    def base_point(self, j):
        """(p, unit direction into the domain, p is a branch point) for Phi_j."""
        mp = self.ctx.mp
        if j == 1:
            return self.curve.b1, mp.mpc(1), True
        if j == 2:
            upper = self.supports.delta2_upper.nodes
            d = upper[-1] - upper[-2]
            return self.curve.b2, d / abs(d), True
        if j == 3:
            if self.subcritical:
                lower = self.supports.delta2_lower.nodes
                t = lower[-2] - lower[-1]
                d = 1 + t / abs(t)
                return mp.mpc(self.supports.a_star), d / abs(d), False
            return mp.mpc(self.curve.a1), mp.mpc(0, -1), True
        raise DomainError(f"Phi index must be 1, 2 or 3, got {j}", value=j)

    def direct(self, z, j):
        """Phi_j(z) as the integral of the branch difference from its base point."""
        mp = self.ctx.mp
        a, b = PHI_PAIRS[j]
        p, direction, branch = self.base_point(j)
        q = p + PHI_BASE_OFFSET * direction
        at_q, triple_q = self.gset.integrals(q)
        at_z, _ = self.gset.integrals(z)
        # the first stretch from p behaves like sqrt at a branch point
        weight = mp.mpf(2) / 3 if branch else 1
        tail = weight * (triple_q.xi[a] - triple_q.xi[b]) * (q - p)
        return (at_z[a] - at_z[b]) - (at_q[a] - at_q[b]) + tail

    def identity_defect(self, z, j):
        return abs(self(z, j) - self.direct(z, j))


def phi_function(z, j, gset, side=None):
    return PhiSet(gset)(z, j, side=side)


def phi_sign_structure(phis, offset=1e-3, per_cut=5):
    """Largest Re Phi_j found on both sides of interior points of Delta_j."""
    mp = phis.ctx.mp
    supports = phis.supports
    out = {}
    for j, interval in ((1, supports.delta1), (3, supports.delta3)):
        if not interval:
            continue
        lo, hi = interval
        xs = [lo + (hi - lo) * (k + 1) / (per_cut + 1) for k in range(per_cut)]
        values = [phis(mp.mpc(x, sign * offset), j).real for x in xs for sign in (1, -1)]
        out[j] = max(values)
    nodes = supports.delta2_lower.nodes
    picks = [nodes[k] for k in np.linspace(1, len(nodes) - 2, per_cut).astype(int)]
    values = []
    for k, z in zip(np.linspace(1, len(nodes) - 2, per_cut).astype(int), picks):
        d = nodes[k + 1] - nodes[k - 1]
        normal = mp.mpc(0, 1) * d / abs(d)
        for point in (z, z.conjugate()):
            n = normal if point is z else normal.conjugate()
            values += [phis(point + offset * n, 2).real, phis(point - offset * n, 2).real]
    out[2] = max(values)
    return out


class PeriodReport(NamedTuple):
    values: tuple
    expected: tuple
    closed: bool

    @property
    def residuals(self):
        return tuple(abs(v - e) for v, e in zip(self.values, self.expected))


def period_integrals(curve, ctx, radius=None, vertices=LOOP_VERTICES):
    """Counterclockwise loop integrals of xi1, xi2, xi3 around all cuts."""
    mp = ctx.mp
    radius = mp.mpf(radius if radius is not None else curve.label_radius)
    start = anchor_triple(mp.mpc(radius), curve, ctx)
    points = [radius * mp.expjpi(mp.mpf(2 * k) / vertices) for k in range(1, vertices)] + [mp.mpc(radius)]
    totals = [mp.mpc(0)] * 3
    triple, z = start, start.z
    for point in points:
        sums, triple = walk_integrals(z, triple, point, curve, ctx)
        totals = [a + b for a, b in zip(totals, sums)]
        z = point
    closed = max(abs(a - b) for a, b in zip(triple.xi, start.xi)) < ctx.tol(4) * max(1, radius ** 2)
    two_pi_i = _two_pi_i(mp)
    expected = (-two_pi_i, two_pi_i * curve.alpha, two_pi_i * (1 - curve.alpha))
    report = PeriodReport(values=tuple(totals), expected=expected, closed=closed)
    logger.info(f"periods: worst residual {mp.nstr(max(report.residuals), 3)}")
    return report


def _support_samples(measure, count, offset, curve, ctx):
    """Points offset to the left of panel starts, away from arc ends."""
    mp = ctx.mp
    ends = []
    for arc, indices in measure.arc_groups().items():
        ends += [measure.panels[indices[0]].start, measure.panels[indices[-1]].end]
    candidates = []
    for k, panel in enumerate(measure.panels):
        if panel.kind != 'arc':
            continue
        if min(abs(panel.start - e) for e in ends) < ENDPOINT_MARGIN:
            continue
        d = panel.end - panel.start
        candidates.append(panel.start + offset * mp.mpc(0, 1) * d / abs(d))
    if len(candidates) < count:
        logger.warning(f"only {len(candidates)} balayage samples available on {measure.name}")
        return candidates
    picks = np.linspace(0, len(candidates) - 1, count).round().astype(int)
    return [candidates[k] for k in sorted(set(picks))]


def balayage_residual(curve, supports, ctx, samples=BALAYAGE_SAMPLES, offset=BALAYAGE_OFFSET):
    """Standard deviation of U(mu_B) - U(mu2 - mu3) over points on E_alpha."""
    if supports.regime == SUBCRITICAL:
        return 0.0
    mu_B = mu_B_measure(supports, ctx)
    signed = mu_measure(2, supports, ctx).combined(mu_measure(3, supports, ctx), 'mu2-mu3', sign=-1)
    points = _support_samples(mu_B, samples, offset, curve, ctx)
    differences = [float(potential_U(mu_B, z, ctx) - potential_U(signed, z, ctx)) for z in points]
    residual = float(np.std(differences))
    logger.info(f"balayage: {len(points)} samples, mean {np.mean(differences):.10f}, std {residual:.3e}")
    return residual


def h_function(z, gset):
    """H(z): Re(g2 + z^3/3 - r1) in Omega_alpha, Re(g3 + z^3/3 - r1) elsewhere."""
    mp = gset.ctx.mp
    z = mp.mpc(z)
    g = gset.values(z)
    r1 = gset.r_constants().r1
    branch = g[1] if gset.supports.point_in_omega(z) else g[2]
    return (branch + z ** 3 / 3).real - r1.real


def h_max_defect(z, gset):
    """|H - max of the two branch expressions|, meaningful near E_alpha in the lower half plane."""
    mp = gset.ctx.mp
    z = mp.mpc(z)
    g = gset.values(z)
    r1 = gset.r_constants().r1
    candidates = [(g[k] + z ** 3 / 3).real - r1.real for k in (1, 2)]
    return abs(h_function(z, gset) - max(candidates))


def h_potential_defect(z, gset, mu_B):
    """|H(z) + U(mu_B)(z) - Re(r3 - r1)|."""
    r = gset.r_constants()
    return abs(h_function(z, gset) + potential_U(mu_B, z, gset.ctx) - (r.r3 - r.r1).real)


def lower_arc_sides(measure, offset=H_SIDE_OFFSET):
    """Points offset to both sides of the middle panel of each arc of ``measure`` in the lower half plane."""
    mp = measure.ctx.mp
    points = []
    for ks in measure.arc_groups().values():
        panel = measure.panels[ks[len(ks) // 2]]
        middle = (panel.start + panel.end) / 2
        if middle.imag >= 0:
            continue
        d = panel.end - panel.start
        normal = mp.mpc(0, 1) * d / abs(d)
        points += [middle + offset * normal, middle - offset * normal]
    return points


def clear_samples(points, supports, ctx):
    """The points at least SAMPLE_CLEARANCE away from the cuts, E_alpha and the boundary of Omega_alpha."""
    kept = []
    for z in points:
        try:
            _check_clearance(z, supports, 'B', ctx)
        except DomainError:
            continue
        kept.append(z)
    return kept


def h_identity_defects(gset, mu_B, points):
    """Worst defects of H = -U(mu_B) + Re(r3 - r1) at ``points`` and of the max form beside E_alpha."""
    ctx = gset.ctx
    clear = clear_samples(points, gset.supports, ctx)
    if not clear:
        raise DomainError("no sample point clears the supports", value=len(points))
    potential = max(float(h_potential_defect(z, gset, mu_B)) for z in clear)
    beside = lower_arc_sides(mu_B)
    maximum = max((float(h_max_defect(z, gset)) for z in beside), default=0.0)
    logger.info(f"H identities: potential {potential:.3e} at {len(clear)} points, max form {maximum:.3e} at {len(beside)}")
    return potential, maximum


def cauchy_identity_defect(supports, atlas, points, ctx):
    """Worst |xi_j - (polynomial part + Cauchy transforms of mu1, mu2, mu3)| over the clear ``points``.

    xi1 = 2z^2 + C1 + C2, xi2 = -z^2 - C1 - C3, xi3 = -z^2 - C2 + C3.
    """
    measures = [mu_measure(j, supports, ctx) for j in (1, 2, 3)]
    worst = 0.0
    for z in clear_samples(points, supports, ctx):
        c1, c2, c3 = (cauchy_C(m, z, ctx) if len(m) else 0 for m in measures)
        expected = (2 * z ** 2 + c1 + c2, -z ** 2 - c1 - c3, -z ** 2 - c2 + c3)
        xi = atlas.labels(z).xi
        worst = max(worst, *(float(abs(a - b)) for a, b in zip(xi, expected)))
    return worst


def _check_clearance(z, supports, which, ctx):
    pieces = ('delta1', 'delta2', 'delta3') + (('E_alpha',) if which == 'B' else ())
    starts, ends = supports.segments(pieces)
    distance = float(point_segment_distances([complex(z)], starts, ends).min())
    if which == 'B' and supports.omega_boundary:
        boundary = [complex(v) for v in supports.omega_boundary]
        distance = min(distance, float(point_segment_distances([complex(z)], boundary[:-1], boundary[1:]).min()))
    if distance < SAMPLE_CLEARANCE:
        raise DomainError(f"sample {complex(z)} is {distance:.3f} from an excluded set", value=complex(z))


def nth_root_diagnostic(mop, which, sample_points, gset, ctx=None):
    """Deviation of (1/N) log|rescaled polynomial| from its g-function limit, per sample point.

    P: (1/N) log|P~| + Re(g1 - 2z^3/3 - r1); A: (1/N) log|2 pi i A~| - Re(g2 + z^3/3 - r2);
    B: the same with g3 outside Omega_alpha and g2 inside, both against r3.
    """
    if which not in ('P', 'A', 'B'):
        raise DomainError(f"unknown polynomial {which!r}", value=which)
    poly = {'P': mop.P, 'A': mop.A, 'B': mop.B}[which]
    if poly is None:
        raise DomainError(f"{which} does not exist for {mop.index.label}", value=which)
    gctx = gset.ctx
    mp = gctx.mp
    N = mop.index.N
    alpha_N = mop.index.alpha_N
    if abs(float(gset.alpha) - float(alpha_N)) > 1e-12:
        logger.warning(f"g-functions at alpha={float(gset.alpha)} used for alpha_N={alpha_N}")
    r = gset.r_constants()
    pctx = poly.ctx
    scaled = varying_weight_polynomial(poly, N, 3, 'typeII' if which == 'P' else 'typeI', pctx)
    two_pi = math.log(2 * math.pi)
    rows = []
    for point in sample_points:
        z = mp.mpc(complex(point))
        _check_clearance(z, gset.supports, which, gctx)
        g = gset.values(z)
        value = abs(scaled(pctx.mp.mpc(complex(point))))
        log_abs = float(pctx.mp.log(value)) / N if value else -math.inf
        cube = z ** 3 / 3
        region = 'outside'
        if which == 'P':
            deviation = log_abs + float((g[0] - 2 * cube).real - r.r1.real)
        elif which == 'A':
            deviation = log_abs + two_pi / N - float((g[1] + cube).real - r.r2.real)
        else:
            inside = gset.supports.point_in_omega(z)
            region = 'omega' if inside else 'outside'
            branch = g[1] if inside else g[2]
            deviation = log_abs + two_pi / N - float((branch + cube).real - r.r3.real)
        rows.append({'re': float(z.real), 'im': float(z.imag), 'region': region, 'deviation': deviation})
    return pd.DataFrame(rows, columns=['re', 'im', 'region', 'deviation'])
