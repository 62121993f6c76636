import logging
from fractions import Fraction
from functools import lru_cache

from laboratory.exceptions import DomainError

logger = logging.getLogger(__name__)

MAX_DENOMINATOR = 64


def as_fraction(p):
    try:
        value = Fraction(p)
    except (TypeError, ValueError) as exc:
        raise DomainError(f"not a rational number: {p!r}", value=p) from exc
    if value <= 0:
        raise DomainError(f"Gamma argument must be positive, got {value}", value=value)
    if value.denominator > MAX_DENOMINATOR:
        raise DomainError(f"denominator {value.denominator} exceeds {MAX_DENOMINATOR}", value=value)
    return value


@lru_cache(maxsize=4096)
def _gamma_cached(numerator, denominator, ctx):
    mp = ctx.mp
    return mp.gamma(mp.mpf(numerator) / denominator)


def gamma_rational(p, ctx):
    """Gamma at a positive rational with small denominator."""
    value = as_fraction(p)
    return _gamma_cached(value.numerator, value.denominator, ctx)


def gamma_by_quadrature(p, ctx):
    """Independent value of Gamma(p) from its Euler integral split at t = 1."""
    value = as_fraction(p)
    mp = ctx.mp
    s = mp.mpf(value.numerator) / value.denominator
    integrand = lambda t: t ** (s - 1) * mp.exp(-t)
    head = mp.quad(integrand, [0, 1])
    tail = mp.quad(integrand, [1, mp.inf])
    logger.debug(f"Gamma({value}) by quadrature at {ctx.digits} digits")
    return head + tail
