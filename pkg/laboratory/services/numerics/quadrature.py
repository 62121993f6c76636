import logging
import math
from functools import lru_cache

from laboratory.exceptions import ConvergenceError
from laboratory.services.numerics.paths import Segment

logger = logging.getLogger(__name__)

MAX_DOUBLINGS = 12
GRADING_RATIO = 0.15


def _legendre_pair(n, x, mp):
    """P_n(x) and P_{n-1}(x) by the three-term recurrence."""
    p_prev, p = mp.mpf(1), x
    for k in range(2, n + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    return p, p_prev


@lru_cache(maxsize=256)
def gauss_legendre_rule(order, ctx):
    """Nodes and weights on [-1, 1], ascending, by Newton on P_order."""
    mp = ctx.mp
    eps = mp.mpf(10) ** (-(ctx.digits + ctx.guard_digits // 2))
    nodes, weights = [], []
    for k in range(1, order + 1):
        x = mp.cos(mp.pi * (4 * k - 1) / (4 * order + 2))
        for _ in range(100):
            p, q = _legendre_pair(order, x, mp)
            dp = order * (x * p - q) / (x * x - 1)
            x_new = x - p / dp
            if mp.almosteq(x_new, x, rel_eps=eps, abs_eps=eps):
                x = x_new
                break
            x = x_new
        p, q = _legendre_pair(order, x, mp)
        dp = order * (x * p - q) / (x * x - 1)
        nodes.append(x)
        weights.append(2 / ((1 - x * x) * dp * dp))
    pairs = sorted(zip(nodes, weights))
    return tuple(n for n, _ in pairs), tuple(w for _, w in pairs)


def default_order(ctx):
    return min(max(20, ctx.digits // 4), 100)


def _panel_sum(h, a, b, panels, rule, mp):
    nodes, weights = rule
    a, b = mp.mpf(a), mp.mpf(b)
    width = (b - a) / panels
    total = mp.mpc(0)
    for p in range(panels):
        lo = a + p * width
        half = width / 2
        mid = lo + half
        total += half * mp.fsum(w * h(mid + half * x) for x, w in zip(nodes, weights))
    return total


def _integrate_interval(h, a, b, ctx, tol, rule):
    mp = ctx.mp
    previous = _panel_sum(h, a, b, 1, rule, mp)
    panels = 1
    for _ in range(MAX_DOUBLINGS):
        panels *= 2
        current = _panel_sum(h, a, b, panels, rule, mp)
        if abs(current - previous) <= tol * max(mp.mpf(1), abs(current)):
            return current
        previous = current
    raise ConvergenceError(
        f"quadrature did not settle with {panels} panels", estimates=(previous, current)
    )


def graded_breakpoints(t0, ctx, ratio=GRADING_RATIO, depth=None):
    """Breakpoints in [0, 1] refining geometrically toward t0."""
    mp = ctx.mp
    depth = depth or int(math.ceil(ctx.digits / (2 * -math.log10(ratio)))) + 2
    points = {mp.mpf(0), mp.mpf(1), t0}
    for side_length, sign in ((t0, -1), (1 - t0, 1)):
        if side_length <= 0:
            continue
        for k in range(1, depth + 1):
            points.add(t0 + sign * side_length * mp.mpf(ratio) ** k)
    return sorted(points)


def _closest_parameter(piece, z, mp):
    direction = piece.end - piece.start
    length2 = abs(direction) ** 2
    if length2 == 0:
        return mp.mpf(0)
    t = ((z - piece.start) * direction.conjugate()).real / length2
    return min(max(t, mp.mpf(0)), mp.mpf(1))


def _mapped_integrand(g, kind):
    if kind == 'start':
        return lambda s: g(s * s) * 2 * s
    if kind == 'end':
        return lambda s: g(1 - (1 - s) ** 2) * 2 * (1 - s)
    return g


def integrate_piece(f, piece, ctx, singular_start=False, singular_end=False, graded_at=None, tol=None, order=None):
    mp = ctx.mp
    tol = tol if tol is not None else ctx.tol(2)
    rule = gauss_legendre_rule(order or default_order(ctx), ctx)
    g = lambda t: f(piece.point(t)) * piece.velocity(t)

    if graded_at is not None and isinstance(piece, Segment):
        t0 = _closest_parameter(piece, graded_at, mp)
        cuts = graded_breakpoints(t0, ctx)
        return mp.fsum(
            _integrate_interval(g, lo, hi, ctx, tol, rule) for lo, hi in zip(cuts[:-1], cuts[1:]) if hi > lo
        )

    half = mp.mpf(1) / 2
    if singular_start and singular_end:
        g_left = lambda u: g(half * u * u) * u
        g_right = lambda u: g(1 - half * (1 - u) ** 2) * (1 - u)
        return _integrate_interval(g_left, 0, 1, ctx, tol, rule) + _integrate_interval(g_right, 0, 1, ctx, tol, rule)
    if singular_start:
        return _integrate_interval(_mapped_integrand(g, 'start'), 0, 1, ctx, tol, rule)
    if singular_end:
        return _integrate_interval(_mapped_integrand(g, 'end'), 0, 1, ctx, tol, rule)
    return _integrate_interval(g, 0, 1, ctx, tol, rule)


def adaptive_quadrature(f, path, ctx, singular_start=False, singular_end=False, graded_at=None, tol=None, order=None):
    """Integral of f(z) dz along ``path``.

    Gauss-Legendre panels are doubled until two successive estimates agree.
    ``singular_start``/``singular_end`` flag inverse-square-root behaviour
    at the path ends (handled by t = s^2); ``graded_at`` refines toward a
    point on or near the path for logarithmic kernels.
    """
    pieces = path.pieces()
    mp = ctx.mp
    total = mp.mpc(0)
    last = len(pieces) - 1
    for index, piece in enumerate(pieces):
        total += integrate_piece(
            f, piece, ctx,
            singular_start=singular_start and index == 0,
            singular_end=singular_end and index == last,
            graded_at=graded_at, tol=tol, order=order,
        )
    return total
