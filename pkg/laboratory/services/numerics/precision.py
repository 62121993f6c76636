from dataclasses import dataclass, replace
from functools import lru_cache

import mpmath
from django.conf import settings

from laboratory.exceptions import ConfigurationError

MIN_DIGITS = 50
MIN_GUARD_DIGITS = 10


@lru_cache(maxsize=None)
def _context(dps):
    ctx = mpmath.MPContext()
    ctx.dps = dps
    return ctx


@dataclass(frozen=True)
class PrecisionCtx:
    """Working precision for one computation.

    Arithmetic runs at ``digits + guard_digits`` decimal digits; tolerances
    quoted by the operations are fractions of ``digits``. Each precision
    owns a private mpmath context, so contexts never share mutable state.
    """
    digits: int = 400
    guard_digits: int = 20

    def __post_init__(self):
        if self.digits < MIN_DIGITS:
            raise ConfigurationError(f"digits must be >= {MIN_DIGITS}, got {self.digits}", setting='digits')
        if self.guard_digits < MIN_GUARD_DIGITS:
            raise ConfigurationError(
                f"guard_digits must be >= {MIN_GUARD_DIGITS}, got {self.guard_digits}", setting='guard_digits'
            )

    @classmethod
    def from_settings(cls, digits=None, geometry=False):
        config = settings.MOPS_LAB
        if digits is None:
            digits = config['GEOMETRY_DIGITS'] if geometry else config['DEFAULT_DIGITS']
        return cls(digits=int(digits), guard_digits=int(config['GUARD_DIGITS']))

    @property
    def mp(self):
        return _context(self.digits + self.guard_digits)

    def tol(self, divisor=1):
        """10^(-digits/divisor) as an mpf."""
        return self.mp.mpf(10) ** (-self.mp.mpf(self.digits) / divisor)

    @property
    def error_bound(self):
        return self.mp.mpf(10) ** (-(self.digits - self.guard_digits))

    def with_digits(self, digits):
        return replace(self, digits=digits)

    def geometry(self):
        """Context used by trajectory, measure and potential layers."""
        return self.with_digits(min(self.digits, int(settings.MOPS_LAB['GEOMETRY_DIGITS'])))

    def mpc(self, value):
        return self.mp.mpc(value)

    def mpf(self, value):
        return self.mp.mpf(value)
