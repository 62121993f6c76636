"""Complex moments of e^{-z^K} over pairs of rays, and their on-disk tables."""
import glob
import logging
import math
import os
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from django.conf import settings

from laboratory.exceptions import DomainError, MomentTableError
from laboratory.services.numerics import Polyline, adaptive_quadrature, gamma_rational
from laboratory.utils.json_io import JSONDataStore, complex_record, parse_complex

logger = logging.getLogger(__name__)

VERIFY_SEED = 1729
VERIFY_FRACTION = 0.05


@dataclass(frozen=True)
class RayPairContour:
    """gamma_ell followed by gamma_kappa reversed; ray j leaves 0 at angle 2*pi*j/K."""
    K: int
    ell: int
    kappa: int

    def __post_init__(self):
        if self.K < 3:
            raise DomainError(f"K must be >= 3, got {self.K}", value=self.K)
        for name in ('ell', 'kappa'):
            index = getattr(self, name)
            if not 0 <= index < self.K:
                raise DomainError(f"{name}={index} outside [0, {self.K - 1}]", value=index)
        if self.ell == self.kappa:
            raise DomainError(f"ell and kappa must differ (both {self.ell})", value=self.ell)

    @property
    def label(self):
        return f"K{self.K}_l{self.ell}_k{self.kappa}"

    def ray_angle(self, index, ctx):
        mp = ctx.mp
        turn = Fraction(index, self.K)
        if turn > Fraction(1, 2):
            turn -= 1
        return 2 * mp.pi * turn.numerator / turn.denominator

    def vanishes(self, k):
        return ((k + 1) * (self.ell - self.kappa)) % self.K == 0


GAMMA_1 = RayPairContour(K=3, ell=0, kappa=2)
GAMMA_2 = RayPairContour(K=3, ell=1, kappa=2)
CUBIC_CONTOURS = {'gamma1': GAMMA_1, 'gamma2': GAMMA_2}


def _unit(turn, mp):
    """e^{2 pi i turn} for a rational ``turn``, exact at quarter turns."""
    turn = turn % 1
    x = 2 * mp.mpf(turn.numerator) / turn.denominator
    return mp.mpc(mp.cospi(x), mp.sinpi(x))


def moment_general(contour, k, ctx):
    """Integral of z^k e^{-z^K} over ``contour``.

    (e^{2 pi i ell (k+1)/K} - e^{2 pi i kappa (k+1)/K}) Gamma((k+1)/K) / K,
    returned as an exact zero when the two exponential factors coincide.
    """
    if k < 0:
        raise DomainError(f"moment index must be >= 0, got {k}", value=k)
    mp = ctx.mp
    if contour.vanishes(k):
        return mp.mpc(0)
    factor = _unit(Fraction(contour.ell * (k + 1), contour.K), mp) - _unit(Fraction(contour.kappa * (k + 1), contour.K), mp)
    return factor * gamma_rational(Fraction(k + 1, contour.K), ctx) / contour.K


def moment_cubic(which, k, ctx):
    if which not in CUBIC_CONTOURS:
        raise DomainError(f"unknown cubic contour {which!r}", value=which)
    return moment_general(CUBIC_CONTOURS[which], k, ctx)


def printed_cubic_moment(which, k, ctx):
    """The cubic moments in their customary closed form.

    gamma2 agrees with ``moment_cubic``; for gamma1 the closed form
    (e^{2 pi i (k+1)/3} - 1) Gamma((k+1)/3) / 3 equals minus the complex
    conjugate of the contour value.
    """
    mp = ctx.mp
    g = gamma_rational(Fraction(k + 1, 3), ctx)
    if which == 'gamma1':
        if (k + 1) % 3 == 0:
            return mp.mpc(0)
        return (_unit(Fraction(k + 1, 3), mp) - 1) * g / 3
    if which == 'gamma2':
        if (k + 1) % 3 == 0:
            return mp.mpc(0)
        return mp.mpc(0, 2) * g * mp.sinpi(mp.mpf(2 * (k + 1)) / 3) / 3
    raise DomainError(f"unknown cubic contour {which!r}", value=which)


def truncation_radius(k, K, decay, ctx):
    """Smallest r with r^K * decay - k log r >= (digits + 10) log 10."""
    mp = ctx.mp
    target = (ctx.digits + 10) * mp.log(10)
    r = (target / decay) ** (mp.mpf(1) / K)
    for _ in range(50):
        nxt = ((target + k * mp.log(max(r, mp.mpf(1)))) / decay) ** (mp.mpf(1) / K)
        if abs(nxt - r) < mp.mpf(10) ** -6:
            return nxt
        r = nxt
    return r


def ray_integral(angle, k, K, ctx):
    """Truncated quadrature of z^k e^{-z^K} along the ray from 0 at ``angle``."""
    mp = ctx.mp
    angle = mp.mpf(angle)
    decay = mp.cos(K * angle)
    if decay <= ctx.tol(2):
        raise DomainError(f"e^(-z^{K}) does not decay along angle {mp.nstr(angle, 8)}", value=angle)
    radius = truncation_radius(k, K, decay, ctx)
    direction = mp.expj(angle)
    knots = [0] + list(range(1, int(math.ceil(float(radius))))) + [radius]
    path = Polyline(tuple(mp.mpf(t) * direction for t in knots))
    return adaptive_quadrature(lambda z: z ** k * mp.exp(-z ** K), path, ctx)


def moment_by_quadrature(contour, k, ctx):
    return ray_integral(contour.ray_angle(contour.ell, ctx), k, contour.K, ctx) - ray_integral(
        contour.ray_angle(contour.kappa, ctx), k, contour.K, ctx
    )


def verify_moment_by_quadrature(contour, k, ctx):
    """|closed form - truncated ray quadrature|."""
    residual = abs(moment_general(contour, k, ctx) - moment_by_quadrature(contour, k, ctx))
    logger.debug(f"moment {contour.label} k={k}: quadrature residual {ctx.mp.nstr(residual, 5)}")
    return residual


@dataclass(frozen=True)
class MomentTable:
    contour: RayPairContour
    values: tuple
    ctx: object

    @classmethod
    def build(cls, contour, k_max, ctx):
        values = tuple(moment_general(contour, k, ctx) for k in range(k_max + 1))
        logger.info(f"Built moment table {contour.label} up to k={k_max} at {ctx.digits} digits")
        return cls(contour=contour, values=values, ctx=ctx)

    @property
    def k_max(self):
        return len(self.values) - 1

    def require(self, k_max):
        if k_max > self.k_max:
            raise MomentTableError(f"table {self.contour.label} stops at k={self.k_max}", required_k_max=k_max)
        return self

    def __getitem__(self, k):
        if k < 0:
            raise DomainError(f"moment index must be >= 0, got {k}", value=k)
        if k > self.k_max:
            raise MomentTableError(f"table {self.contour.label} stops at k={self.k_max}", required_k_max=k)
        return self.values[k]

    def to_payload(self):
        return {
            'K': self.contour.K,
            'ell': self.contour.ell,
            'kappa': self.contour.kappa,
            'digits': self.ctx.digits,
            'guard_digits': self.ctx.guard_digits,
            'schema_version': settings.MOPS_LAB['SCHEMA_VERSION'],
            'values': [dict(k=k, **complex_record(v, self.ctx)) for k, v in enumerate(self.values)],
        }

    @classmethod
    def from_payload(cls, payload, ctx):
        contour = RayPairContour(K=int(payload['K']), ell=int(payload['ell']), kappa=int(payload['kappa']))
        ordered = sorted(payload['values'], key=lambda item: int(item['k']))
        if [int(item['k']) for item in ordered] != list(range(len(ordered))):
            raise MomentTableError(f"table {contour.label} has gaps", required_k_max=len(ordered) - 1)
        return cls(contour=contour, values=tuple(parse_complex(item, ctx) for item in ordered), ctx=ctx)


class MomentCache:
    """Moment tables stored as JSON decimal strings under ``CACHE_DIR``."""

    def __init__(self, directory=None):
        self.directory = str(directory or settings.MOPS_LAB['CACHE_DIR'])
        self.store = JSONDataStore(self.directory)

    def path(self, contour, ctx):
        return self.store.resolve(f"moments_K{contour.K}_l{contour.ell}_k{contour.kappa}_d{ctx.digits}.json")

    def build(self, contour, k_max, ctx):
        table = MomentTable.build(contour, k_max, ctx)
        self.store.dump(self.path(contour, ctx), table.to_payload())
        return table

    def load(self, contour, ctx, k_max=None):
        payload = self.store.load(self.path(contour, ctx))
        if payload is None:
            return None
        if int(payload.get('digits', -1)) != ctx.digits or int(payload.get('guard_digits', -1)) != ctx.guard_digits:
            logger.warning(f"Ignoring moment table {contour.label}: stored at other precision")
            return None
        try:
            table = MomentTable.from_payload(payload, ctx)
        except (KeyError, TypeError, ValueError, MomentTableError) as e:
            logger.error(f"Unreadable moment table {contour.label}: {str(e)}")
            return None
        if k_max is not None and table.k_max < k_max:
            logger.info(f"Moment table {contour.label} too short ({table.k_max} < {k_max}), rebuilding")
            return None
        return table

    def load_or_build(self, contour, k_max, ctx):
        table = self.load(contour, ctx, k_max=k_max)
        if table is None:
            table = self.build(contour, k_max, ctx)
        return table

    def verify(self, contour, ctx, fraction=VERIFY_FRACTION):
        """Regenerate and compare the stored file; spot-check a sample by quadrature."""
        path = self.path(contour, ctx)
        stored = self.store.load(path)
        if stored is None:
            return {'path': path, 'ok': False, 'reason': 'missing or unreadable'}
        try:
            table = MomentTable.from_payload(stored, ctx)
        except (KeyError, TypeError, ValueError, MomentTableError) as e:
            return {'path': path, 'ok': False, 'reason': f"malformed: {e}"}
        regenerated = MomentTable.build(contour, table.k_max, ctx).to_payload()
        identical = regenerated['values'] == stored['values']

        rng = np.random.default_rng(VERIFY_SEED)
        count = max(1, int(math.ceil(fraction * (table.k_max + 1))))
        sample = sorted(int(k) for k in rng.choice(table.k_max + 1, size=min(count, table.k_max + 1), replace=False))
        residuals = {k: abs(table[k] - moment_by_quadrature(contour, k, ctx)) for k in sample}
        worst = max(residuals.values())
        ok = identical and worst < ctx.tol(2)
        if not ok:
            logger.warning(f"Moment table {contour.label} failed verification")
        return {
            'path': path,
            'ok': ok,
            'identical': identical,
            'sampled_k': sample,
            'max_residual': ctx.mp.nstr(worst, 5),
        }

    def purge(self, contour=None):
        pattern = f"moments_K{contour.K}_l{contour.ell}_k{contour.kappa}_d*.json" if contour else "moments_*.json"
        removed = 0
        for path in glob.glob(os.path.join(self.directory, pattern)):
            os.remove(path)
            removed += 1
        logger.info(f"Purged {removed} moment table(s) from {self.directory}")
        return removed

    def tables(self):
        return sorted(os.path.basename(p) for p in glob.glob(os.path.join(self.directory, "moments_*.json")))
