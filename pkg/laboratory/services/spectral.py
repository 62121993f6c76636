"""The spectral curve xi^3 - R(z) xi + D(z) = 0 of the cubic weight.

R(z) = 3z^4 - 3z - c and D(z) = -2z^6 + 3z^3 + c z^2 - 3 tau with
tau = alpha (1 - alpha). Branch values are labelled xi1, xi2, xi3 by
their behaviour at infinity (2z^2, -z^2 + alpha/z, -z^2 + (1 - alpha)/z)
and carried inward by continuation along paths that avoid the cuts.
"""
import itertools
import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction

from django.conf import settings

from laboratory.exceptions import BranchLabelError, ConvergenceError, DomainError
from laboratory.services.numerics import ComplexPoly, poly_roots

logger = logging.getLogger(__name__)

SUBCRITICAL = 'subcritical'
INTERMEDIATE = 'intermediate'
SUPERCRITICAL = 'supercritical'
CRITICAL = 'critical'

TAU0 = Fraction(1, 12)
MATCH_RATIO = 0.2
MAX_STEP_FACTOR = 0.05
BISECTION_TOL = 1e-8

TRANSITION_BRACKETS = {
    'tau_c': (0.18, 0.20),
    'tau2': (0.22, 0.235),
    'tau1': (0.09, None),
}


def as_mpf(value, mp):
    if isinstance(value, Fraction):
        return mp.mpf(value.numerator) / value.denominator
    if isinstance(value, float):
        return mp.mpf(repr(value))
    return mp.mpf(value)


def tau_of_alpha(alpha, ctx):
    a = as_mpf(alpha, ctx.mp)
    return a * (1 - a)


def alpha_of_tau(tau, ctx):
    """Smaller root of alpha (1 - alpha) = tau."""
    mp = ctx.mp
    tau = as_mpf(tau, mp)
    return (1 - mp.sqrt(1 - 4 * tau)) / 2


def c_of_alpha(alpha, ctx):
    """c = -(243/64 (1 - 4 tau)^2)^(1/3), real cube root."""
    mp = ctx.mp
    a = as_mpf(alpha, mp)
    if not 0 < a <= mp.mpf(1) / 2:
        raise DomainError(f"alpha must lie in (0, 1/2], got {mp.nstr(a, 10)}", value=alpha)
    tau = a * (1 - a)
    value = mp.mpf(243) / 64 * (1 - 4 * tau) ** 2
    return -mp.cbrt(value) if value else mp.mpf(0)


def curve_polynomials(alpha, ctx):
    mp = ctx.mp
    tau = tau_of_alpha(alpha, ctx)
    c = c_of_alpha(alpha, ctx)
    R = ComplexPoly((-c, -3, 0, 0, 3), ctx)
    D = ComplexPoly((-3 * tau, 0, c, 3, 0, 0, -2), ctx)
    return R, D


def discriminant(R, D):
    """4 R^3 - 27 D^2; the z^12 terms cancel, leaving degree 6."""
    return R ** 3 * 4 - D ** 2 * 27


def discriminant_closed_form(alpha, ctx):
    mp = ctx.mp
    tau = tau_of_alpha(alpha, ctx)
    c = c_of_alpha(alpha, ctx)
    return ComplexPoly((
        -4 * c ** 3 - 243 * tau ** 2,
        -36 * c ** 2,
        (162 * tau - 108) * c,
        486 * tau - 108,
        9 * c ** 2,
        54 * c,
        81 - 324 * tau,
    ), ctx)


@dataclass(frozen=True)
class TransitionConstants:
    tau0: object
    tau1: object
    tau_c: object
    tau2: object
    alpha_c: object
    alpha_2: object
    source: str = 'reference'
    trace: dict = field(default_factory=dict, compare=False)

    @classmethod
    def reference(cls, ctx):
        mp = ctx.mp
        ref = settings.MOPS_LAB['REFERENCE_TRANSITIONS']
        alpha_c = mp.mpf(ref['alpha_c'])
        alpha_2 = mp.mpf(ref['alpha_2'])
        tau1 = ref.get('tau1')
        return cls(
            tau0=as_mpf(TAU0, mp),
            tau1=mp.mpf(tau1) if tau1 is not None else None,
            tau_c=mp.mpf(ref['tau_c']),
            tau2=alpha_2 * (1 - alpha_2),
            alpha_c=alpha_c,
            alpha_2=alpha_2,
        )

    def as_dict(self, ctx, digits=12):
        fmt = lambda v: None if v is None else ctx.mp.nstr(v, digits)
        return {
            'tau0': fmt(self.tau0), 'tau1': fmt(self.tau1), 'tau_c': fmt(self.tau_c), 'tau2': fmt(self.tau2),
            'alpha_c': fmt(self.alpha_c), 'alpha_2': fmt(self.alpha_2), 'source': self.source,
        }


@dataclass(frozen=True)
class RegimeInfo:
    regime: str
    tau_band: str
    critical: bool = False


def classify_regime(alpha, transitions, ctx):
    """Regime from alpha against alpha_c and alpha_2; band from tau against the transition taus."""
    mp = ctx.mp
    a = as_mpf(alpha, mp)
    tau = a * (1 - a)
    near = ctx.tol(4)
    critical = abs(a - transitions.alpha_c) < near or abs(a - transitions.alpha_2) < near
    if critical:
        logger.warning(f"alpha={mp.nstr(a, 10)} sits on a transition; excluded from the limit theorems")
        regime = CRITICAL
    elif a < transitions.alpha_c:
        regime = SUBCRITICAL
    elif a < transitions.alpha_2:
        regime = INTERMEDIATE
    else:
        regime = SUPERCRITICAL

    tau0 = transitions.tau0
    if tau < tau0:
        band = '0-tau0'
    elif tau < transitions.tau_c:
        if transitions.tau1 is None:
            band = 'tau0-tauc'
        else:
            band = 'tau0-tau1' if tau < transitions.tau1 else 'tau1-tauc'
    elif tau < transitions.tau2:
        band = 'tauc-tau2'
    else:
        band = 'tau2-quarter'
    return RegimeInfo(regime=regime, tau_band=band, critical=critical)


@dataclass(frozen=True)
class SpectralCurveData:
    alpha: object
    tau: object
    c: object
    R: ComplexPoly
    D: ComplexPoly
    ctx: object
    a1: object = None
    b1: object = None
    a2: object = None
    b2: object = None
    b_star: object = None
    coalescent: bool = False
    regime: str = None
    tau_band: str = None

    @property
    def has_branch_points(self):
        return self.a1 is not None

    @property
    def branch_points(self):
        return tuple(p for p in (self.a1, self.b1, self.a2, self.b2) if p is not None)

    @property
    def singular_points(self):
        points = self.branch_points
        return points + (self.b_star,) if self.b_star is not None else points

    @property
    def label_radius(self):
        """Radius beyond which branches are labelled by their expansions at infinity."""
        mp = self.ctx.mp
        size = max((abs(p) for p in self.singular_points), default=mp.mpf(1))
        return max(mp.mpf(4), 3 * size)

    def as_dict(self, digits=20):
        mp = self.ctx.mp
        fmt = lambda v: None if v is None else mp.nstr(v, digits)
        cfmt = lambda v: None if v is None else {'re': fmt(mp.mpc(v).real), 'im': fmt(mp.mpc(v).imag)}
        return {
            'alpha': fmt(self.alpha),
            'tau': fmt(self.tau),
            'c': fmt(self.c),
            'branch_points': {'a1': fmt(self.a1), 'b1': fmt(self.b1), 'a2': cfmt(self.a2), 'b2': cfmt(self.b2)},
            'b_star': fmt(self.b_star),
            'coalescent': self.coalescent,
            'regime': self.regime,
            'tau_band': self.tau_band,
        }


def curve_without_points(alpha, ctx):
    mp = ctx.mp
    a = as_mpf(alpha, mp)
    if not 0 < a < mp.mpf(1) / 2:
        raise DomainError(f"alpha must lie in (0, 1/2), got {mp.nstr(a, 10)}", value=alpha)
    R, D = curve_polynomials(a, ctx)
    return SpectralCurveData(alpha=a, tau=a * (1 - a), c=c_of_alpha(a, ctx), R=R, D=D, ctx=ctx)


def _newton_real(f, df, x, ctx, steps=20):
    mp = ctx.mp
    for _ in range(steps):
        d = df(x)
        if d == 0:
            break
        dx = f(x) / d
        x = x - dx
        if abs(dx) < ctx.tol(1) * max(1, abs(x)):
            break
    return x


def _real_if_close(z, ctx):
    z = ctx.mp.mpc(z)
    return z.real if abs(z.imag) < ctx.tol(4) * max(1, abs(z)) else None


def branch_points(curve, ctx):
    """Branch points a1 < b1, a2 (Im < 0), b2 = conj(a2) and the node b_star.

    Roots of 4R^3 - 27D^2 are clustered with radius 10^(-digits/6): the
    double root is the node; an order-3 cluster means the node has merged
    with b1 (tau = 1/12) and is reported as ``coalescent``.
    """
    mp = ctx.mp
    disc = discriminant(curve.R, curve.D)
    d_disc = disc.derivative()
    tagged = poly_roots(disc, ctx, cluster_radius=ctx.tol(6))
    by_multiplicity = {}
    for root in tagged:
        by_multiplicity.setdefault(root.multiplicity, []).append(root.value)

    coalescent = False
    if by_multiplicity.get(2) and len(by_multiplicity[2]) == 1 and len(by_multiplicity.get(1, [])) == 4:
        node = _real_if_close(by_multiplicity[2][0], ctx)
        simple = by_multiplicity[1]
    elif by_multiplicity.get(3) and len(by_multiplicity[3]) == 1 and len(by_multiplicity.get(1, [])) == 3:
        coalescent = True
        node = _real_if_close(by_multiplicity[3][0], ctx)
        simple = by_multiplicity[1]
        logger.warning(f"node and b1 coalesce at tau={mp.nstr(curve.tau, 12)}")
    else:
        shape = {k: len(v) for k, v in by_multiplicity.items()}
        raise BranchLabelError(
            f"unexpected discriminant root structure {shape}; raise the precision or use the coalescent value tau=1/12"
        )
    if node is None:
        raise BranchLabelError("node of the spectral curve is not real")
    if not coalescent:
        node = _newton_real(lambda x: d_disc(x).real, lambda x: d_disc.derivative()(x).real, node, ctx)

    reals = sorted(x for x in (_real_if_close(z, ctx) for z in simple) if x is not None)
    complex_roots = [mp.mpc(z) for z in simple if _real_if_close(z, ctx) is None]
    if coalescent:
        if len(reals) != 1 or len(complex_roots) != 2:
            raise BranchLabelError("coalescent discriminant without one real and two complex simple roots")
        a1, b1 = reals[0], node
    else:
        if len(reals) != 2 or len(complex_roots) != 2:
            raise BranchLabelError(f"expected two real branch points, found {len(reals)}")
        a1, b1 = reals
    a2 = min(complex_roots, key=lambda z: z.imag)
    b2 = max(complex_roots, key=lambda z: z.imag)
    if abs(b2 - a2.conjugate()) > ctx.tol(2) * max(1, abs(a2)):
        raise BranchLabelError("complex branch points are not conjugate")
    b2 = a2.conjugate()

    scale = disc.coefficient_scale()
    for name, point in (('a1', a1), ('b1', b1), ('a2', a2), ('b_star', node)):
        if abs(disc(point)) > ctx.tol(2) * scale * max(1, abs(point)) ** 6:
            raise ConvergenceError(f"discriminant residual too large at {name}", best=point, residual=abs(disc(point)))
    logger.debug(f"branch points at alpha={mp.nstr(curve.alpha, 10)}: a1={mp.nstr(a1, 10)}, b1={mp.nstr(b1, 10)}")
    return {'a1': a1, 'b1': b1, 'a2': a2, 'b2': b2, 'b_star': node, 'coalescent': coalescent}


def spectral_curve(alpha, ctx, transitions=None):
    """Curve data with branch points, node and regime labels."""
    curve = curve_without_points(alpha, ctx)
    points = branch_points(curve, ctx)
    info = classify_regime(curve.alpha, transitions or TransitionConstants.reference(ctx), ctx)
    return replace(curve, regime=info.regime, tau_band=info.tau_band, **points)


@dataclass(frozen=True)
class XiTriple:
    """Branch values at z; ``xi[0], xi[1], xi[2]`` are xi1, xi2, xi3."""
    z: object
    xi: tuple

    @property
    def xi1(self):
        return self.xi[0]

    @property
    def xi2(self):
        return self.xi[1]

    @property
    def xi3(self):
        return self.xi[2]

    def conjugated(self):
        return XiTriple(z=self.z.conjugate(), xi=tuple(x.conjugate() for x in self.xi))

    def symmetric_residual(self, curve):
        """Relative residuals of the elementary symmetric functions against 0, -R, -D."""
        mp = curve.ctx.mp
        x1, x2, x3 = self.xi
        scale = max(mp.mpf(1), *(abs(x) for x in self.xi))
        e1 = abs(x1 + x2 + x3) / scale
        e2 = abs(x1 * x2 + x1 * x3 + x2 * x3 + curve.R(self.z)) / scale ** 2
        e3 = abs(x1 * x2 * x3 + curve.D(self.z)) / scale ** 3
        return max(e1, e2, e3)


def cubic_roots(R_value, D_value, ctx):
    """Roots of xi^3 - R xi + D by Cardano with one Newton polish each."""
    mp = ctx.mp
    p = -mp.mpc(R_value)
    q = mp.mpc(D_value)
    if p == 0 and q == 0:
        return (mp.mpc(0),) * 3
    s = mp.sqrt(q * q / 4 + p ** 3 / 27)
    # pick the sign that avoids cancellation in -q/2 +- s
    u3 = -q / 2 + s if abs(-q / 2 + s) >= abs(-q / 2 - s) else -q / 2 - s
    u = mp.cbrt(u3) if u3 != 0 else mp.mpc(0)
    omega = mp.expjpi(mp.mpf(2) / 3)
    roots = []
    for k in range(3):
        uk = u * omega ** k
        xi = uk - p / (3 * uk) if uk != 0 else mp.mpc(0)
        for _ in range(2):
            f = xi ** 3 + p * xi + q
            df = 3 * xi ** 2 + p
            if df == 0:
                break
            xi = xi - f / df
        roots.append(xi)
    return tuple(roots)


def asymptotic_labels(z, curve, ctx):
    """Label by the expansions at infinity; None when the assignment is not clear-cut."""
    mp = ctx.mp
    z = mp.mpc(z)
    roots = list(cubic_roots(curve.R(z), curve.D(z), ctx))
    target = 2 * z * z
    order = sorted(range(3), key=lambda j: abs(roots[j] - target))
    first = order[0]
    if abs(roots[order[1]] - target) < 2 * abs(roots[first] - target):
        return None
    rest = order[1:]
    w = [z * (roots[j] + z * z) for j in rest]
    alpha = curve.alpha
    gap = abs(1 - 2 * alpha) / 3
    if abs(w[0] - alpha) < gap and abs(w[1] - (1 - alpha)) < gap:
        second, third = rest
    elif abs(w[1] - alpha) < gap and abs(w[0] - (1 - alpha)) < gap:
        third, second = rest
    else:
        return None
    return XiTriple(z=z, xi=(roots[first], roots[second], roots[third]))


def anchor_triple(z, curve, ctx):
    """Asymptotic labels at z, pushing outward along the same ray until they are clear."""
    mp = ctx.mp
    z = mp.mpc(z)
    radius = max(abs(z), curve.label_radius)
    direction = z / abs(z) if z != 0 else mp.mpc(1)
    for _ in range(12):
        triple = asymptotic_labels(radius * direction, curve, ctx)
        if triple is not None:
            if radius > abs(z):
                triple = continue_roots(triple, z, curve, ctx)
            return triple
        radius *= 2
    raise BranchLabelError("asymptotic labels never separated", point=complex(z))


def _derivative_predictor(xi, z, curve):
    dR = curve.R.derivative()(z)
    dD = curve.D.derivative()(z)
    denom = 3 * xi * xi - curve.R(z)
    return (dR * xi - dD) / denom if denom != 0 else 0


def match_roots(predicted, roots, ctx):
    """Best permutation of ``roots`` onto ``predicted``, or None if it is not clear-cut."""
    best, best_cost = None, None
    for perm in itertools.permutations(range(3)):
        cost = sum(abs(roots[perm[i]] - predicted[i]) for i in range(3))
        if best_cost is None or cost < best_cost:
            best, best_cost = perm, cost
    merged = ctx.tol(4) * max(1, *(abs(r) for r in roots))
    for i in range(3):
        chosen = roots[best[i]]
        d_match = abs(chosen - predicted[i])
        others = [abs(roots[j] - predicted[i]) for j in range(3) if j != best[i] and abs(roots[j] - chosen) > merged]
        if others and d_match >= MATCH_RATIO * min(others):
            return None
    return tuple(roots[best[i]] for i in range(3))


def continue_roots(start, z_end, curve, ctx, avoid=None):
    """Carry the labelled triple ``start`` along the segment to ``z_end``.

    Each step is at most 0.05 max(1, |z|) and half the distance to the
    nearest branch point or node; roots are matched to a Taylor prediction
    and the step is halved when the matching is ambiguous.
    """
    mp = ctx.mp
    z_end = mp.mpc(z_end)
    z = mp.mpc(start.z)
    xi = tuple(start.xi)
    obstacles = list(curve.singular_points) + list(avoid or ())
    underflow = ctx.tol(4)
    steps = 0
    while z != z_end:
        remaining = z_end - z
        distance = abs(remaining)
        h = min(distance, MAX_STEP_FACTOR * max(1, abs(z)))
        if obstacles:
            h = min(h, min(abs(z - p) for p in obstacles) / 2)
        while True:
            if h < underflow * max(1, abs(z)):
                raise BranchLabelError("continuation step underflow near a branch point", point=complex(z))
            z_new = z_end if h >= distance else z + remaining / distance * h
            dz = z_new - z
            predicted = [x + _derivative_predictor(x, z, curve) * dz for x in xi]
            matched = match_roots(predicted, cubic_roots(curve.R(z_new), curve.D(z_new), ctx), ctx)
            if matched is not None:
                break
            h = h / 2
        z, xi = z_new, matched
        steps += 1
    logger.debug(f"continued branch labels in {steps} steps")
    return XiTriple(z=z, xi=xi)


def xi_along(start, waypoints, curve, ctx):
    """Continue a labelled triple through consecutive waypoints."""
    triple = start
    for point in waypoints:
        triple = continue_roots(triple, point, curve, ctx)
    return triple


def xi_at(z, curve, ctx, seed_labels=None):
    """Labelled branch values at z.

    With ``seed_labels`` the labels are continued along the straight
    segment from the seed; without it, z must lie beyond the labelling
    radius. Use the branch atlas for interior points off any segment.
    """
    mp = ctx.mp
    z = mp.mpc(z)
    ball = ctx.tol(4)
    for p in curve.branch_points:
        if abs(z - p) < ball:
            raise DomainError(f"z={mp.nstr(z, 10)} is a branch point", value=z)
    if seed_labels is not None:
        return continue_roots(seed_labels, z, curve, ctx)
    if abs(z) >= curve.label_radius:
        return anchor_triple(z, curve, ctx)
    raise BranchLabelError("interior point needs seed labels or the branch atlas", point=complex(z))


def ordering_rules(curve):
    """Expected orderings of the real branches on the cut-free real intervals.

    Returns (lower, upper, order) with ``order`` listing branch indices
    from the smallest value to the largest.
    """
    mp = curve.ctx.mp
    tau = curve.tau
    rules = []
    b_star = curve.b_star
    rules.append((b_star, mp.inf, (1, 2, 0)))
    if not curve.coalescent:
        rules.append((curve.b1, b_star, (1, 0, 2) if tau < as_mpf(TAU0, mp) else (2, 1, 0)))
    return rules


def coalescing_pairs(curve, subcritical):
    """Branch index pairs that meet at each branch point."""
    return {
        'a1': (0, 1) if subcritical else (1, 2),
        'b1': (0, 1),
        'a2': (0, 2),
        'b2': (0, 2),
    }


def ordering_holds(triple, order, ctx):
    values = [triple.xi[j] for j in order]
    if any(abs(v.imag) > ctx.tol(4) * max(1, abs(v)) for v in values):
        return False
    return all(values[i].real < values[i + 1].real for i in range(2))


def _bisect(event_value, lo, hi, ctx, name):
    mp = ctx.mp
    lo, hi = mp.mpf(lo), mp.mpf(hi)
    trace = []
    f_lo = event_value(lo)
    f_hi = event_value(hi)
    trace.extend([(float(lo), float(f_lo)), (float(hi), float(f_hi))])
    if (f_lo > 0) == (f_hi > 0):
        logger.error(f"{name} event does not change sign on [{float(lo)}, {float(hi)}]")
        raise ConvergenceError(f"{name} event has no sign change on the bracket", estimates=trace)
    while hi - lo > BISECTION_TOL:
        mid = (lo + hi) / 2
        f_mid = event_value(mid)
        trace.append((float(mid), float(f_mid)))
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    logger.info(f"{name} located at {mp.nstr((lo + hi) / 2, 10)} after {len(trace)} evaluations")
    return (lo + hi) / 2, trace


def find_transition_taus(ctx, which=('tau_c', 'tau2', 'tau1'), brackets=None):
    """tau_c, tau2 and tau1 by bisection on the trajectory event functions; tau0 = 1/12."""
    from laboratory.services import geometry

    gctx = ctx.geometry()
    mp = gctx.mp
    brackets = dict(TRANSITION_BRACKETS, **(brackets or {}))
    found, traces = {}, {}
    for name in ('tau_c', 'tau2', 'tau1'):
        if name not in which:
            continue
        lo, hi = brackets[name]
        if hi is None:
            hi = found.get('tau_c', TransitionConstants.reference(gctx).tau_c) - mp.mpf('1e-4')
        event_value = lambda tau, event=name: geometry.transition_event_probe(tau, event, gctx)
        found[name], traces[name] = _bisect(event_value, lo, hi, gctx, name)

    reference = TransitionConstants.reference(gctx)
    tau_c = found.get('tau_c', reference.tau_c)
    tau2 = found.get('tau2', reference.tau2)
    return TransitionConstants(
        tau0=as_mpf(TAU0, mp),
        tau1=found.get('tau1'),
        tau_c=tau_c,
        tau2=tau2,
        alpha_c=alpha_of_tau(tau_c, gctx),
        alpha_2=alpha_of_tau(tau2, gctx),
        source='computed',
        trace=traces,
    )
