"""Shared, cached geometry for the slower test modules."""
from fractions import Fraction
from functools import lru_cache

from laboratory.services.geometry import geometry_for
from laboratory.services.numerics import PrecisionCtx

GEOMETRY_DIGITS = 50
SUBCRITICAL_ALPHA = Fraction(3, 20)
INTERMEDIATE_ALPHA = Fraction(3, 10)
SUPERCRITICAL_ALPHA = Fraction(19, 50)


def geometry_ctx():
    return PrecisionCtx(digits=GEOMETRY_DIGITS)


@lru_cache(maxsize=None)
def supports_at(alpha):
    return geometry_for(alpha, geometry_ctx())
