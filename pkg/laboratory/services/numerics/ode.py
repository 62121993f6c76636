import logging
from dataclasses import dataclass, field

from laboratory.exceptions import TracingError
from laboratory.services.numerics.paths import ArcPolyline, segment_intersection

logger = logging.getLogger(__name__)

# Dormand-Prince 5(4) tableau (same coefficients as scipy's RK45)
_A = (
    (),
    ((1, 5),),
    ((3, 40), (9, 40)),
    ((44, 45), (-56, 15), (32, 9)),
    ((19372, 6561), (-25360, 2187), (64448, 6561), (-212, 729)),
    ((9017, 3168), (-355, 33), (46732, 5247), (49, 176), (-5103, 18656)),
    ((35, 384), (0, 1), (500, 1113), (125, 192), (-2187, 6784), (11, 84)),
)
_B = ((35, 384), (0, 1), (500, 1113), (125, 192), (-2187, 6784), (11, 84), (0, 1))
_B_LOW = ((5179, 57600), (0, 1), (7571, 16695), (393, 640), (-92097, 339200), (187, 2100), (1, 40))

BISECTION_STEPS = 80


def _rational(mp, pair):
    return mp.mpf(pair[0]) / pair[1]


class StopEvent:
    name = 'event'

    def locate(self, z0, z1, ctx):
        """Chord parameter in (0, 1] where the event fires, or None."""
        raise NotImplementedError


@dataclass
class LevelEvent(StopEvent):
    """Sign change of a real-valued function along the step chord."""
    name: str = field()
    function: object

    def locate(self, z0, z1, ctx):
        g0, g1 = self.function(z0), self.function(z1)
        if g0 == 0 or (g0 > 0) == (g1 > 0):
            return None
        lo, hi = ctx.mp.mpf(0), ctx.mp.mpf(1)
        for _ in range(BISECTION_STEPS):
            mid = (lo + hi) / 2
            if (self.function(z0 + (z1 - z0) * mid) > 0) == (g0 > 0):
                lo = mid
            else:
                hi = mid
        return hi


@dataclass
class PolylineHitEvent(StopEvent):
    name: str = field()
    nodes: tuple

    def locate(self, z0, z1, ctx):
        best = None
        for q0, q1 in zip(self.nodes[:-1], self.nodes[1:]):
            hit = segment_intersection(z0, z1, q0, q1)
            if hit is not None and hit[0] > 0 and (best is None or hit[0] < best):
                best = hit[0]
        return best


@dataclass
class BallEvent(StopEvent):
    name: str = field()
    center: object
    radius: object

    def locate(self, z0, z1, ctx):
        if abs(z1 - self.center) > self.radius:
            return None
        mp = ctx.mp
        d = z1 - z0
        w = z0 - self.center
        a = abs(d) ** 2
        b = 2 * (w * d.conjugate()).real
        c = abs(w) ** 2 - self.radius ** 2
        disc = b * b - 4 * a * c
        if a == 0 or disc < 0:
            return mp.mpf(1)
        t = (-b - mp.sqrt(disc)) / (2 * a)
        return min(max(t, mp.mpf(0)), mp.mpf(1))


class BoxEvent(StopEvent):
    name = 'box'

    def __init__(self, half_width):
        self.half_width = half_width

    def _outside(self, z):
        return max(abs(z.real), abs(z.imag)) - self.half_width

    def locate(self, z0, z1, ctx):
        return LevelEvent('box', self._outside).locate(z0, z1, ctx)


def ode_trace(field, start, events, ctx, max_step=0.05, arclength_cap=20, box=10, corrector=None,
              start_payload=None, start_label='', tol=None):
    """Trace dz/ds = field(z) (unit speed) until an event fires.

    Dormand-Prince 5(4) with local error per unit arclength below ``tol``
    (default 10^(-digits/4)). ``corrector(z_prev, z_new, payload_prev,
    final)`` may move an accepted node and returns ``(z, payload)``; with
    ``final=True`` it must leave the point where it is.
    """
    mp = ctx.mp
    tol = tol if tol is not None else ctx.tol(4)
    step_limit = max_step if callable(max_step) else (lambda z: max_step)
    a = [[_rational(mp, c) for c in row] for row in _A]
    b = [_rational(mp, c) for c in _B]
    e = [_rational(mp, c) - _rational(mp, d) for c, d in zip(_B, _B_LOW)]
    stops = list(events) + [BoxEvent(mp.mpf(box))]

    z = mp.mpc(start)
    nodes, payloads = [z], [start_payload]
    length = mp.mpf(0)
    h = mp.mpf(step_limit(z)) / 8
    underflow = ctx.tol(2)
    accepted = rejected = 0

    while True:
        h = min(h, mp.mpf(step_limit(z)), arclength_cap - length)
        if h < underflow * max(1, abs(z)):
            raise TracingError(f"step underflow (h={mp.nstr(h, 3)})", position=complex(z))
        k = []
        for i in range(7):
            zi = z + h * mp.fsum(a[i][j] * k[j] for j in range(i)) if i else z
            k.append(field(zi))
        z_new = z + h * mp.fsum(b[i] * k[i] for i in range(7))
        err = abs(mp.fsum(e[i] * k[i] for i in range(7)))
        if err > tol:
            rejected += 1
            h *= max(mp.mpf('0.2'), mp.mpf('0.9') * (tol / err) ** (mp.mpf(1) / 5))
            continue

        payload = None
        if corrector is not None:
            z_new, payload = corrector(z, z_new, payloads[-1], False)
        hit_t, hit_name = None, None
        for event in stops:
            t = event.locate(z, z_new, ctx)
            if t is not None and (hit_t is None or t < hit_t):
                hit_t, hit_name = t, event.name
        if hit_t is not None:
            z_hit = z + (z_new - z) * hit_t
            if corrector is not None:
                z_hit, payload = corrector(z, z_hit, payloads[-1], True)
            nodes.append(z_hit)
            payloads.append(payload)
            logger.debug(f"trace stopped by '{hit_name}' after {accepted} steps ({rejected} rejected)")
            return ArcPolyline(nodes=tuple(nodes), payloads=tuple(payloads), start_label=start_label, end_label=hit_name)

        accepted += 1
        length += abs(z_new - z)
        nodes.append(z_new)
        payloads.append(payload)
        if length >= arclength_cap:
            logger.debug(f"trace reached arclength cap {arclength_cap}")
            return ArcPolyline(nodes=tuple(nodes), payloads=tuple(payloads), start_label=start_label, end_label='arclength')
        z = z_new
        growth = mp.mpf(5) if err == 0 else min(mp.mpf(5), mp.mpf('0.9') * (tol / err) ** (mp.mpf(1) / 5))
        h *= growth
