from laboratory.services.numerics.gamma import gamma_by_quadrature, gamma_rational
from laboratory.services.numerics.linalg import ComplexMatrix, LinearSolution, solve_linear
from laboratory.services.numerics.ode import BallEvent, LevelEvent, PolylineHitEvent, ode_trace
from laboratory.services.numerics.paths import ArcPolyline, CircularArc, Polyline, Segment, circle
from laboratory.services.numerics.polynomials import ComplexPoly, TaggedRoot, expand_roots, poly_roots
from laboratory.services.numerics.precision import PrecisionCtx
from laboratory.services.numerics.quadrature import adaptive_quadrature, gauss_legendre_rule

__all__ = (
    'ArcPolyline', 'BallEvent', 'CircularArc', 'ComplexMatrix', 'ComplexPoly', 'LevelEvent', 'LinearSolution',
    'PolylineHitEvent', 'Polyline', 'PrecisionCtx', 'Segment', 'TaggedRoot', 'adaptive_quadrature', 'circle',
    'expand_roots', 'gamma_by_quadrature', 'gamma_rational', 'gauss_legendre_rule', 'ode_trace', 'poly_roots',
    'solve_linear',
)
