"""Critical trajectories of -(xi_i - xi_j)^2 dz^2 and the sets built from them.

Arcs are traced with the two defining branches kept in slots 0 and 1 and
the remaining branch in slot 2; each node carries the slot values and the
integral of every slot from the start of the arc, so the level
Re int (slot0 - slot1) ds and any other branch integral along the arc are
available without global labels.
"""
import logging
import threading
from dataclasses import dataclass, field, replace

import numpy as np
from django.conf import settings
from matplotlib.path import Path

from laboratory.exceptions import BranchLabelError, DomainError, RegimeError, TracingError
from laboratory.services.numerics import (
    ArcPolyline, BallEvent, LevelEvent, PolylineHitEvent, Segment, adaptive_quadrature, gauss_legendre_rule, ode_trace,
)
from laboratory.services.numerics.paths import point_segment_distances
from laboratory.services.numerics.planning import CutAvoidingPlanner
from laboratory.services.spectral import (
    INTERMEDIATE, SUBCRITICAL, SUPERCRITICAL, XiTriple, anchor_triple, continue_roots, cubic_roots, discriminant,
    match_roots, spectral_curve,
)

logger = logging.getLogger(__name__)

CHORD_ORDER = 12
LAUNCH_ORDER = 24
MAX_STEP = 0.05
ARCLENGTH_CAP = 12
A_STAR_EXCLUSION = 0.05
BOUNDARY_OFFSET = 1e-4


@dataclass(frozen=True)
class SlotPayload:
    roots: tuple
    integrals: tuple

    @property
    def q(self):
        return self.roots[0] - self.roots[1]

    @property
    def level(self):
        return self.integrals[0] - self.integrals[1]

    def conjugated(self):
        return SlotPayload(
            roots=tuple(r.conjugate() for r in self.roots), integrals=tuple(i.conjugate() for i in self.integrals)
        )

    def reordered(self, order):
        return SlotPayload(roots=tuple(self.roots[k] for k in order), integrals=tuple(self.integrals[k] for k in order))


def track_slots(previous, z, curve, ctx):
    """Roots at z matched slot by slot to ``previous``."""
    matched = match_roots(list(previous), cubic_roots(curve.R(z), curve.D(z), ctx), ctx)
    if matched is None:
        raise BranchLabelError("slot tracking became ambiguous", point=complex(z))
    return matched


def chord_integrals(z0, roots0, z1, curve, ctx, order=CHORD_ORDER):
    """Integrals of each slot along the chord [z0, z1] and the slot values at z1."""
    mp = ctx.mp
    nodes, weights = gauss_legendre_rule(order, ctx)
    half = (z1 - z0) / 2
    mid = (z0 + z1) / 2
    sums = [mp.mpc(0)] * 3
    roots = roots0
    for x, w in zip(nodes, weights):
        roots = track_slots(roots, mid + half * x, curve, ctx)
        for k in range(3):
            sums[k] += w * roots[k]
    end = track_slots(roots, z1, curve, ctx)
    return tuple(half * s for s in sums), end


def trajectory_field(z, branch_pair, curve, labels, ctx):
    """Unit direction i conj(Q)/|Q| with Q = xi_i - xi_j taken from ``labels``."""
    i, j = branch_pair
    q = labels.xi[i] - labels.xi[j]
    if abs(q) < ctx.tol(4):
        raise TracingError("field is singular (Q vanishes)", position=complex(z))
    return 1j * q.conjugate() / abs(q)


def _branch_distance(z, curve):
    return min(abs(z - p) for p in curve.branch_points)


def _separation(roots):
    return min(abs(roots[0] - roots[1]), abs(roots[0] - roots[2]), abs(roots[1] - roots[2]))


def trace_level_curve(curve, start, payload, direction, events, ctx, level_target=0, max_step=MAX_STEP,
                      arclength_cap=ARCLENGTH_CAP, start_label=''):
    """Follow Re int (slot0 - slot1) ds = level_target from ``start`` along ``direction``."""
    mp = ctx.mp
    state = {'roots': payload.roots}
    correction_tol = ctx.tol(2)

    def raw_field(z):
        roots = track_slots(state['roots'], z, curve, ctx)
        q = roots[0] - roots[1]
        if abs(q) < ctx.tol(4):
            raise TracingError("field is singular (Q vanishes)", position=complex(z))
        return 1j * q.conjugate() / abs(q)

    orientation = 1 if (raw_field(start) * mp.mpc(direction).conjugate()).real >= 0 else -1

    def field(z):
        return orientation * raw_field(z)

    def corrector(z_prev, z_new, payload_prev, final):
        pieces, roots = chord_integrals(z_prev, payload_prev.roots, z_new, curve, ctx)
        if not final:
            for _ in range(3):
                level = payload_prev.integrals[0] + pieces[0] - payload_prev.integrals[1] - pieces[1]
                q = roots[0] - roots[1]
                delta = -(level.real - level_target) * q.conjugate() / abs(q) ** 2
                if abs(delta) < correction_tol:
                    break
                z_new = z_new + delta
                pieces, roots = chord_integrals(z_prev, payload_prev.roots, z_new, curve, ctx)
        state['roots'] = roots
        integrals = tuple(a + b for a, b in zip(payload_prev.integrals, pieces))
        return z_new, SlotPayload(roots=roots, integrals=integrals)

    def step_limit(z):
        return min(
            mp.mpf(max_step),
            mp.mpf('0.2') * _separation(state['roots']),
            _branch_distance(z, curve) / 4 if _branch_distance(z, curve) > 0 else mp.mpf(max_step),
        )

    arc = ode_trace(
        field, start, events, ctx, max_step=step_limit, arclength_cap=arclength_cap,
        box=settings.MOPS_LAB['BOUNDING_BOX'], corrector=corrector, start_payload=payload, start_label=start_label,
    )
    return replace(arc, orientation=orientation)


@dataclass(frozen=True)
class Launch:
    start: object
    payload: SlotPayload
    direction: object


def branch_launches(curve, point, ctx, radius=None):
    """The three critical directions at a simple branch point, with start data.

    Near ``point`` Q^2 ~ k (z - point) with k = disc'(point) / (81 xi0^4),
    xi0 = 3D/(2R) the double branch value; directions are
    (2/3)(pi/2 + n pi - arg sqrt(k)). Starts sit at ``radius`` (the
    configured branch ball) and are pulled onto the zero level.
    """
    mp = ctx.mp
    radius = mp.mpf(radius if radius is not None else settings.MOPS_LAB['BRANCH_BALL'])
    point = mp.mpc(point)
    disc = discriminant(curve.R, curve.D)
    xi0 = 3 * curve.D(point) / (2 * curve.R(point))
    k = disc.derivative()(point) / (81 * xi0 ** 4)
    sqrt_k = mp.sqrt(k)
    launches = []
    for n in range(3):
        theta = mp.mpf(2) / 3 * (mp.pi / 2 + n * mp.pi - mp.arg(sqrt_k))
        direction = mp.expj(theta)
        z0 = point + radius * direction
        payload = _launch_payload(point, z0, sqrt_k, curve, ctx)
        for _ in range(3):
            delta = -payload.level.real * payload.q.conjugate() / abs(payload.q) ** 2
            if abs(delta) < ctx.tol(2):
                break
            z0 = z0 + delta
            payload = _launch_payload(point, z0, sqrt_k, curve, ctx)
        launches.append(Launch(start=z0, payload=payload, direction=direction))
    return launches


def _launch_payload(point, z0, sqrt_k, curve, ctx):
    """Slot values at z0 (pair first) and their integrals from the branch point."""
    mp = ctx.mp
    roots = list(cubic_roots(curve.R(z0), curve.D(z0), ctx))
    pairs = [(0, 1), (0, 2), (1, 2)]
    i, j = min(pairs, key=lambda p: abs(roots[p[0]] - roots[p[1]]))
    third = 3 - i - j
    expected_q = sqrt_k * mp.sqrt(z0 - point)
    if abs((roots[i] - roots[j]) - expected_q) > abs((roots[j] - roots[i]) - expected_q):
        i, j = j, i
    end_roots = (roots[i], roots[j], roots[third])
    xi0 = (roots[i] + roots[j]) / 2

    # z = point + (z0 - point) u^2 removes the square-root endpoint
    nodes, weights = gauss_legendre_rule(LAUNCH_ORDER, ctx)
    span = z0 - point
    sums = [mp.mpc(0)] * 3
    for x, w in zip(nodes, weights):
        u = (x + 1) / 2
        expected = (xi0 + (end_roots[0] - xi0) * u, xi0 + (end_roots[1] - xi0) * u, end_roots[2])
        at = point + span * u * u
        matched = match_roots(list(expected), cubic_roots(curve.R(at), curve.D(at), ctx), ctx)
        if matched is None:
            raise BranchLabelError("branch point launch could not separate the pair", point=complex(at))
        for k in range(3):
            sums[k] += w / 2 * matched[k] * 2 * u * span
    return SlotPayload(roots=end_roots, integrals=tuple(sums))


def _refine_real_crossing(arc, curve, ctx):
    """Move the final node onto the real axis where the level is exactly zero."""
    mp = ctx.mp
    z_prev, payload_prev = arc.nodes[-2], arc.payloads[-2]
    x = mp.mpf(arc.end.real)
    for _ in range(30):
        pieces, roots = chord_integrals(z_prev, payload_prev.roots, mp.mpc(x), curve, ctx)
        level = payload_prev.integrals[0] + pieces[0] - payload_prev.integrals[1] - pieces[1]
        slope = (roots[0] - roots[1]).real
        if slope == 0:
            break
        dx = -level.real / slope
        x += dx
        if abs(dx) < ctx.tol(2):
            break
    pieces, roots = chord_integrals(z_prev, payload_prev.roots, mp.mpc(x), curve, ctx)
    payload = SlotPayload(roots=roots, integrals=tuple(a + b for a, b in zip(payload_prev.integrals, pieces)))
    return replace(arc, nodes=arc.nodes[:-1] + (mp.mpc(x),), payloads=arc.payloads[:-1] + (payload,)), x


def support_delta2(curve, ctx):
    """Delta2 oriented a2 -> b2 and the crossing a_star.

    Traces from a2 along the critical directions that do not point
    downward, keeps the shortest one that reaches the real axis and
    mirrors it to b2.
    """
    mp = ctx.mp
    candidates = []
    for launch in branch_launches(curve, curve.a2, ctx):
        if launch.direction.imag < -0.5:
            continue
        try:
            arc = trace_level_curve(
                curve, launch.start, launch.payload, launch.direction,
                [LevelEvent('real_axis', lambda z: z.imag)], ctx, start_label='a2',
            )
        except TracingError as e:
            logger.debug(f"candidate from a2 abandoned: {str(e)}")
            continue
        if arc.end_label == 'real_axis':
            candidates.append(arc)
    if not candidates:
        raise TracingError("no critical trajectory from a2 reaches the real axis", position=complex(curve.a2))
    lower = min(candidates, key=lambda arc: arc.arclength())
    lower, a_star = _refine_real_crossing(lower, curve, ctx)
    lower = replace(lower, nodes=(curve.a2,) + lower.nodes, payloads=(None,) + lower.payloads, end_label='a_star')
    upper = lower.conjugated(lambda p: p.conjugated() if p is not None else None).reversed()
    upper = replace(upper, nodes=upper.nodes[:-1] + (curve.b2,), start_label='a_star', end_label='b2')
    delta2 = lower.joined(upper)
    delta2 = replace(delta2, meta={'split': len(lower) - 1})
    logger.info(f"Delta2 traced with {len(delta2)} nodes, a_star={mp.nstr(a_star, 12)}")
    return delta2, a_star


def _pair_slot_facing_right(payload, ctx):
    """Pair slot that continues into xi3 just right of a_star."""
    roots = payload.roots
    scale = max(1, *(abs(r) for r in roots))
    if all(abs(r.imag) < ctx.tol(8) * scale for r in roots):
        return 0 if roots[0].real > roots[1].real else 1
    return 0 if abs(roots[0].imag) < abs(roots[1].imag) else 1


@dataclass(frozen=True)
class SupportSet:
    curve: object
    a_star: object
    delta1: tuple
    delta2: ArcPolyline
    delta3: tuple = None
    regime: str = None
    E_alpha: tuple = ()
    gamma_L: ArcPolyline = None
    gamma_R: ArcPolyline = None
    a_B: object = None
    omega_boundary: tuple = ()
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def delta2_lower(self):
        return self.delta2.sliced(0, self.delta2.meta['split'] + 1)

    @property
    def delta2_upper(self):
        return self.delta2.sliced(self.delta2.meta['split'], len(self.delta2))

    @property
    def slot_p(self):
        return _pair_slot_facing_right(self.delta2_lower.payloads[-1], self.curve.ctx)

    @property
    def lower_integrals(self):
        """Integrals of the slots along Delta2 from a2 to a_star."""
        return self.delta2_lower.payloads[-1].integrals

    def mu2_mass(self):
        mp = self.curve.ctx.mp
        return abs(self.delta2_lower.payloads[-1].level.imag) / mp.pi

    def cut_segments(self):
        """Delta1, Delta3 and the chords of Delta2 as float segments."""
        segments = [(complex(self.delta1[0]), complex(self.delta1[1]))]
        if self.delta3:
            segments.append((complex(self.delta3[0]), complex(self.delta3[1])))
        nodes = [complex(z) for z in self.delta2.nodes]
        segments.extend(zip(nodes[:-1], nodes[1:]))
        return segments

    def segments(self, which=('delta1', 'delta2')):
        starts, ends = [], []
        for name in which:
            if name in ('delta1', 'delta3'):
                interval = getattr(self, name)
                if interval:
                    starts.append(complex(interval[0]))
                    ends.append(complex(interval[1]))
            elif name == 'delta2':
                nodes = [complex(z) for z in self.delta2.nodes]
                starts.extend(nodes[:-1])
                ends.extend(nodes[1:])
            elif name == 'E_alpha':
                for arc in self.E_alpha:
                    nodes = [complex(z) for z in arc.nodes]
                    starts.extend(nodes[:-1])
                    ends.extend(nodes[1:])
            else:
                raise DomainError(f"unknown support piece {name!r}", value=name)
        return starts, ends

    @property
    def omega_path(self):
        if not self.omega_boundary:
            return None
        vertices = np.array([[z.real, z.imag] for z in (complex(v) for v in self.omega_boundary)])
        return Path(np.vstack([vertices, vertices[:1]]), closed=True)

    def point_in_omega(self, z):
        path = self.omega_path
        z = complex(z)
        if path is None or z.imag >= 0:
            return False
        return bool(path.contains_point((z.real, z.imag)))


def compute_supports(curve, ctx, delta2=None):
    if delta2 is None:
        delta2, a_star = support_delta2(curve, ctx)
    else:
        delta2, a_star = delta2
    if a_star < curve.a1:
        delta1, delta3, regime = (curve.a1, curve.b1), None, SUBCRITICAL
    else:
        if not a_star < curve.b1:
            raise RegimeError("a_star lies beyond b1", alpha=float(curve.alpha))
        delta1, delta3, regime = (a_star, curve.b1), (curve.a1, a_star), None
    return SupportSet(curve=curve, a_star=a_star, delta1=delta1, delta2=delta2, delta3=delta3, regime=regime)


def _launch_gamma_R(supports, ctx):
    """gamma_R leaves a_star downward continuing Delta2 in the upper half plane, with branches (xi2, xi3)."""
    end_payload = supports.delta2_lower.payloads[-1]
    p = supports.slot_p
    order = (2, p, 1 - p)
    roots = tuple(end_payload.roots[k] for k in order)
    payload = SlotPayload(roots=roots, integrals=(ctx.mp.mpc(0),) * 3)
    q = roots[0] - roots[1]
    down = 1j * q.conjugate() / abs(q)
    direction = down if down.imag < 0 else -down
    return payload, direction


def compute_E_alpha(curve, supports, ctx):
    """E_alpha, gamma_L, gamma_R, a_B and the boundary of Omega_alpha."""
    mp = ctx.mp
    if supports.regime == SUBCRITICAL:
        return replace(supports, E_alpha=(supports.delta2,))

    lower = supports.delta2_lower
    far_from_star = tuple(z for z in lower.nodes if abs(z - supports.a_star) > A_STAR_EXCLUSION)
    ball = mp.mpf(settings.MOPS_LAB['BRANCH_BALL']) * 10
    payload, direction = _launch_gamma_R(supports, ctx)
    gamma_R = trace_level_curve(
        curve, mp.mpc(supports.a_star), payload, direction,
        [PolylineHitEvent('delta2', far_from_star), BallEvent('a1', curve.a1, ball),
         LevelEvent('real_axis', lambda z: z.imag)],
        ctx, start_label='a_star',
    )
    upper_tangent = supports.delta2_upper.payloads[0]
    mismatch = _tangent_mismatch(upper_tangent.q, gamma_R.payloads[0].q, mp)

    if gamma_R.end_label == 'delta2':
        launches = sorted(branch_launches(curve, curve.a1, ctx), key=lambda l: l.direction.imag)
        first = launches[0]
        gamma_L = trace_level_curve(
            curve, first.start, first.payload, first.direction,
            [PolylineHitEvent('delta2', tuple(lower.nodes[1:]))], ctx, start_label='a1',
        )
        if gamma_L.end_label != 'delta2':
            logger.error(f"gamma_L ended at '{gamma_L.end_label}' instead of Delta2")
            raise RegimeError("gamma_L does not meet Delta2", alpha=float(curve.alpha))
        gamma_L = replace(gamma_L, nodes=(curve.a1,) + gamma_L.nodes, payloads=(None,) + gamma_L.payloads)
        a_B = gamma_L.end
        split = min(range(len(lower)), key=lambda k: abs(lower.nodes[k] - a_B))
        lower_part = replace(lower.sliced(0, split + 1), nodes=lower.nodes[:split] + (a_B,))
        E_alpha = (gamma_L, gamma_R, lower_part, supports.delta2_upper)
        boundary = gamma_L.nodes + tuple(reversed(gamma_R.nodes[:-1])) + (mp.mpc(supports.a_star),)
        regime = INTERMEDIATE
        meta = {'a_B_gap': abs(gamma_R.end - a_B), 'tangent_mismatch': mismatch}
    elif gamma_R.end_label == 'a1':
        gamma_R = replace(gamma_R, nodes=gamma_R.nodes + (curve.a1,), payloads=gamma_R.payloads + (gamma_R.payloads[-1],))
        gamma_L = gamma_R.reversed()
        a_B = None
        E_alpha = (supports.delta2_upper, gamma_R)
        boundary = gamma_L.nodes
        regime = SUPERCRITICAL
        meta = {'tangent_mismatch': mismatch}
    else:
        logger.error(f"gamma_R ended at '{gamma_R.end_label}'")
        raise RegimeError(f"gamma_R ended at '{gamma_R.end_label}'", alpha=float(curve.alpha))

    logger.info(f"E_alpha assembled in the {regime} regime")
    return replace(
        supports, regime=regime, E_alpha=E_alpha, gamma_L=gamma_L, gamma_R=gamma_R, a_B=a_B,
        omega_boundary=tuple(boundary), meta=meta,
    )


def _tangent_mismatch(q_a, q_b, mp):
    """Angle between the trajectory lines with slopes i conj(q_a) and i conj(q_b), modulo pi."""
    angle = abs(mp.arg(q_a.conjugate()) - mp.arg(q_b.conjugate())) % mp.pi
    return min(angle, mp.pi - angle)


def geometry_for(alpha, ctx, transitions=None):
    """Curve, supports and E_alpha at geometry precision."""
    gctx = ctx.geometry()
    curve = spectral_curve(alpha, gctx, transitions=transitions)
    supports = compute_supports(curve, gctx)
    return compute_E_alpha(curve, supports, gctx)


def geometric_regime(supports):
    return supports.regime


def tau_c_probe(alpha, ctx):
    """a_star - a1: negative below tau_c, positive above."""
    curve = spectral_curve(alpha, ctx)
    _, a_star = support_delta2(curve, ctx)
    return a_star - curve.a1


def _lower_gap_integral(supports):
    """Re of the integral of (xi2 - xi3) along Delta2 from a2 to a_star."""
    integrals = supports.lower_integrals
    return (integrals[2] - integrals[supports.slot_p]).real


def tau2_probe(alpha, ctx):
    """Level of a2 on the (xi2, xi3) trajectory through a_star; changes sign at tau2."""
    curve = spectral_curve(alpha, ctx)
    supports = compute_supports(curve, ctx)
    return _lower_gap_integral(supports)


def tau1_probe(alpha, ctx):
    """Level of a1 relative to a2 for (xi2, xi3), through Delta2 and the real gap (a_star, a1)."""
    mp = ctx.mp
    curve = spectral_curve(alpha, ctx)
    supports = compute_supports(curve, ctx)
    if supports.a_star >= curve.a1:
        raise RegimeError("the tau1 event needs a_star < a1", alpha=float(curve.alpha))

    def mid_minus_max(x):
        roots = sorted(cubic_roots(curve.R(x), curve.D(x), ctx), key=lambda r: r.real)
        return mp.mpc(roots[1].real - roots[2].real)

    gap = adaptive_quadrature(mid_minus_max, Segment(mp.mpf(supports.a_star), mp.mpf(curve.a1)), ctx, singular_end=True)
    return _lower_gap_integral(supports) + gap.real


def transition_event_probe(tau, which, ctx):
    """Signed event function at tau whose sign flips at the named transition (tau_c, tau1 or tau2)."""
    from laboratory.services.spectral import alpha_of_tau

    events = {'tau_c': tau_c_probe, 'tau1': tau1_probe, 'tau2': tau2_probe}
    if which not in events:
        raise DomainError(f"unknown transition {which!r}", value=which)
    gctx = ctx.geometry()
    return events[which](alpha_of_tau(tau, gctx), gctx)


def hausdorff_to_support(points, supports, which=('delta1', 'delta2')):
    """max over points of the distance to the selected support pieces."""
    starts, ends = supports.segments(which)
    if len(points) == 0 or len(starts) == 0:
        raise DomainError("Hausdorff distance needs points and a nonempty support")
    distances = point_segment_distances([complex(p) for p in points], starts, ends)
    return float(distances.min(axis=1).max())


class BranchAtlas:
    """Labelled branch values anywhere off the cuts Delta1, Delta2, Delta3.

    Labels are fixed at sink nodes of a waypoint grid by the expansions at
    infinity and continued inward along grid edges that cross no cut; grid
    labels are memoized (first writer wins).
    """

    def __init__(self, supports, ctx, spacing=0.25):
        self.supports = supports
        self.curve = supports.curve
        self.ctx = ctx
        self.planner = CutAvoidingPlanner(
            supports.cut_segments(), self.curve.singular_points,
            sink_radius=float(self.curve.label_radius), spacing=spacing,
        )
        self._memo = {}
        self._lock = threading.Lock()

    def _grid_label(self, k):
        nodes, _ = self.planner.tree
        with self._lock:
            if k in self._memo:
                return self._memo[k]
        chain = self.planner.chain(k)
        start = 0
        triple = None
        with self._lock:
            for position in range(len(chain) - 1, -1, -1):
                if chain[position] in self._memo:
                    start, triple = position, self._memo[chain[position]]
                    break
        if triple is None:
            triple = anchor_triple(self.ctx.mp.mpc(nodes[chain[0]]), self.curve, self.ctx)
            with self._lock:
                triple = self._memo.setdefault(chain[0], triple)
        for j in chain[start + 1:]:
            triple = continue_roots(triple, self.ctx.mp.mpc(nodes[j]), self.curve, self.ctx)
            with self._lock:
                triple = self._memo.setdefault(j, triple)
        return triple

    def labels(self, z):
        mp = self.ctx.mp
        z = mp.mpc(z)
        k = self.planner.entry_node(complex(z))
        return continue_roots(self._grid_label(k), z, self.curve, self.ctx)

    def labels_along(self, waypoints, start):
        """Continue ``start`` through ``waypoints`` (the caller keeps them off the cuts)."""
        triple = start
        for point in waypoints:
            triple = continue_roots(triple, self.ctx.mp.mpc(point), self.curve, self.ctx)
        return triple

    def boundary_values(self, z, normal):
        """Labelled values at a cut point z as limits from the side z + normal."""
        mp = self.ctx.mp
        z = mp.mpc(z)
        normal = mp.mpc(normal) / abs(normal)
        offset = min(mp.mpf(BOUNDARY_OFFSET), _branch_distance(z, self.curve) / 100)
        side = self.labels(z + offset * normal)
        matched = match_roots(list(side.xi), cubic_roots(self.curve.R(z), self.curve.D(z), self.ctx), self.ctx)
        if matched is None:
            raise BranchLabelError("boundary values could not be matched", point=complex(z))
        return XiTriple(z=z, xi=matched)

    def boundary_pairing_defect(self, z, normal, pair):
        """|xi_i(+) - xi_j(-)| for a cut point, the two sides taken along +/- normal."""
        plus = self.boundary_values(z, normal)
        minus = self.boundary_values(z, -self.ctx.mp.mpc(normal))
        i, j = pair
        return max(abs(plus.xi[i] - minus.xi[j]), abs(plus.xi[j] - minus.xi[i]))
