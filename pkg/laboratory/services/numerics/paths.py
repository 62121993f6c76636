"""Parametrized paths in the complex plane.

Every path exposes ``pieces()``: smooth pieces with ``point(t)`` and
``velocity(t)`` for t in [0, 1]. ``ArcPolyline`` additionally carries the
per-node payloads produced by the trajectory tracer.
"""
from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class Segment:
    start: object
    end: object

    def pieces(self):
        return (self,)

    def point(self, t):
        return self.start + (self.end - self.start) * t

    def velocity(self, t):
        return self.end - self.start

    @property
    def length(self):
        return abs(self.end - self.start)


@dataclass(frozen=True)
class CircularArc:
    center: object
    radius: object
    theta0: object
    theta1: object
    ctx: object

    def pieces(self):
        return (self,)

    def point(self, t):
        mp = self.ctx.mp
        return self.center + self.radius * mp.expj(self.theta0 + (self.theta1 - self.theta0) * t)

    def velocity(self, t):
        mp = self.ctx.mp
        dtheta = self.theta1 - self.theta0
        return 1j * self.radius * dtheta * mp.expj(self.theta0 + dtheta * t)


def circle(center, radius, ctx, start_angle=0):
    mp = ctx.mp
    return CircularArc(center, radius, mp.mpf(start_angle), mp.mpf(start_angle) + 2 * mp.pi, ctx)


@dataclass(frozen=True)
class Polyline:
    nodes: tuple

    def pieces(self):
        return tuple(Segment(a, b) for a, b in zip(self.nodes[:-1], self.nodes[1:]))


@dataclass(frozen=True)
class ArcPolyline:
    """Oriented discretized arc with branch data attached to its nodes.

    ``payloads[i]`` is whatever the tracer stored for node i (for
    trajectories: the root triple in slot order and the accumulated level).
    ``pair`` names the branch pair whose difference defines the arc when it
    is known by label; slot-tracked arcs leave it as ``(0, 1)``.
    """
    nodes: tuple
    payloads: tuple = ()
    pair: tuple = (0, 1)
    orientation: int = 1
    start_label: str = ''
    end_label: str = ''
    meta: dict = field(default_factory=dict, compare=False)

    def pieces(self):
        return tuple(Segment(a, b) for a, b in zip(self.nodes[:-1], self.nodes[1:]))

    def __len__(self):
        return len(self.nodes)

    @property
    def start(self):
        return self.nodes[0]

    @property
    def end(self):
        return self.nodes[-1]

    def reversed(self):
        return replace(
            self, nodes=tuple(reversed(self.nodes)), payloads=tuple(reversed(self.payloads)),
            orientation=-self.orientation, start_label=self.end_label, end_label=self.start_label,
        )

    def conjugated(self, conjugate_payload=None):
        payloads = self.payloads
        if conjugate_payload is not None:
            payloads = tuple(conjugate_payload(p) for p in payloads)
        return replace(self, nodes=tuple(z.conjugate() for z in self.nodes), payloads=payloads)

    def joined(self, other):
        """Concatenate with an arc starting where this one ends."""
        return replace(
            self, nodes=self.nodes + other.nodes[1:], payloads=self.payloads + other.payloads[1:],
            end_label=other.end_label,
        )

    def sliced(self, start, stop):
        return replace(self, nodes=self.nodes[start:stop], payloads=self.payloads[start:stop])

    def arclength(self):
        return sum(abs(b - a) for a, b in zip(self.nodes[:-1], self.nodes[1:]))

    def max_spacing(self):
        return max((abs(b - a) for a, b in zip(self.nodes[:-1], self.nodes[1:])), default=0)

    def as_array(self):
        return np.array([complex(z) for z in self.nodes], dtype=complex)

    def trajectory_defect(self):
        """Largest |Re level| stored in the payloads (0 for arcs without levels)."""
        levels = [abs(p.level.real) for p in self.payloads if getattr(p, 'level', None) is not None]
        return max(levels, default=0)


def segment_intersection(p1, p2, q1, q2):
    """Parameters (s, t) of the crossing of [p1,p2] and [q1,q2], or None."""
    d1 = p2 - p1
    d2 = q2 - q1
    denom = d1.real * d2.imag - d1.imag * d2.real
    if denom == 0:
        return None
    w = q1 - p1
    s = (w.real * d2.imag - w.imag * d2.real) / denom
    t = (w.real * d1.imag - w.imag * d1.real) / denom
    if 0 <= s <= 1 and 0 <= t <= 1:
        return s, t
    return None


def point_segment_distances(points, starts, ends):
    """Distance matrix (points x segments) between complex points and segments."""
    points = np.asarray(points, dtype=complex)[:, None]
    starts = np.asarray(starts, dtype=complex)[None, :]
    ends = np.asarray(ends, dtype=complex)[None, :]
    direction = ends - starts
    length2 = np.abs(direction) ** 2
    with np.errstate(invalid='ignore', divide='ignore'):
        t = np.where(length2 > 0, ((points - starts) * np.conj(direction)).real / length2, 0.0)
    t = np.clip(t, 0.0, 1.0)
    return np.abs(points - (starts + t * direction))


def crosses_any(p, q, starts, ends):
    """True when the segment [p, q] meets any of the segments [starts[k], ends[k]]."""
    if len(starts) == 0:
        return False
    p, q = complex(p), complex(q)
    starts = np.asarray(starts, dtype=complex)
    ends = np.asarray(ends, dtype=complex)

    def orient(a, b, c):
        return np.sign((b - a).real * (c - a).imag - (b - a).imag * (c - a).real)

    o1 = orient(p, q, starts)
    o2 = orient(p, q, ends)
    o3 = orient(starts, ends, p)
    o4 = orient(starts, ends, q)
    return bool(np.any((o1 != o2) & (o3 != o4)))
