from fractions import Fraction

from django.test import SimpleTestCase, override_settings

from laboratory.exceptions import ConfigurationError, DomainError, SingularMatrixError
from laboratory.services.numerics import (
    ArcPolyline, ComplexMatrix, ComplexPoly, LevelEvent, PrecisionCtx, Segment, TaggedRoot, adaptive_quadrature,
    circle, expand_roots, gamma_by_quadrature, gamma_rational, gauss_legendre_rule, ode_trace, poly_roots,
    solve_linear,
)

TEST_DIGITS = 60


class PrecisionCtxTests(SimpleTestCase):
    def test_rejects_low_precision(self):
        with self.assertRaises(ConfigurationError):
            PrecisionCtx(digits=20)
        with self.assertRaises(ConfigurationError):
            PrecisionCtx(digits=60, guard_digits=2)

    @override_settings(MOPS_LAB={'DEFAULT_DIGITS': 120, 'GUARD_DIGITS': 15, 'GEOMETRY_DIGITS': 55})
    def test_from_settings(self):
        ctx = PrecisionCtx.from_settings()
        self.assertEqual((ctx.digits, ctx.guard_digits), (120, 15))
        self.assertEqual(PrecisionCtx.from_settings(geometry=True).digits, 55)
        self.assertEqual(ctx.geometry().digits, 55)
        self.assertEqual(ctx.mp.dps, 135)

    def test_tolerance(self):
        ctx = PrecisionCtx(digits=TEST_DIGITS)
        self.assertLess(abs(ctx.tol(2) * ctx.mp.mpf(10) ** 30 - 1), ctx.mp.mpf(10) ** -50)


class GammaTests(SimpleTestCase):
    def setUp(self):
        self.ctx = PrecisionCtx(digits=TEST_DIGITS)

    def test_half(self):
        mp = self.ctx.mp
        self.assertLess(abs(gamma_rational(Fraction(1, 2), self.ctx) - mp.sqrt(mp.pi)), self.ctx.tol())

    def test_matches_quadrature(self):
        for p in ('1/3', '2/3', '4/3', '7/5'):
            difference = abs(gamma_rational(p, self.ctx) - gamma_by_quadrature(p, self.ctx))
            self.assertLess(difference, self.ctx.tol(2), p)

    def test_domain(self):
        with self.assertRaises(DomainError):
            gamma_rational(-1, self.ctx)
        with self.assertRaises(DomainError):
            gamma_rational(Fraction(1, 101), self.ctx)


class LinearSolveTests(SimpleTestCase):
    def setUp(self):
        self.ctx = PrecisionCtx(digits=TEST_DIGITS)

    def test_solves_complex_system(self):
        A = ComplexMatrix.from_rows([[2, 1j], [1, 3]], self.ctx)
        expected = [self.ctx.mpc(1 - 2j), self.ctx.mpc(0.5)]
        b = A.matvec(expected)
        solution = solve_linear(A, b, self.ctx, verify=True)
        for got, want in zip(solution.x, expected):
            self.assertLess(abs(got - want), self.ctx.tol(2))
        self.assertLess(solution.residual, self.ctx.tol(2))

    def test_singular(self):
        A = ComplexMatrix.from_rows([[1, 2], [2, 4]], self.ctx)
        with self.assertRaises(SingularMatrixError) as caught:
            solve_linear(A, [1, 2], self.ctx)
        self.assertEqual(caught.exception.step, 1)

    def test_shape_checks(self):
        A = ComplexMatrix.from_rows([[1, 2, 3], [4, 5, 6]], self.ctx)
        with self.assertRaises(DomainError):
            solve_linear(A, [1, 2], self.ctx)
        with self.assertRaises(DomainError):
            ComplexMatrix.from_rows([[1, 2], [3]], self.ctx)


class PolynomialTests(SimpleTestCase):
    def setUp(self):
        self.ctx = PrecisionCtx(digits=TEST_DIGITS)

    def test_trailing_zeros_trimmed(self):
        poly = ComplexPoly((1, 2, 0, 0), self.ctx)
        self.assertEqual(poly.degree, 1)
        self.assertTrue(ComplexPoly((0,), self.ctx).is_zero)
        with self.assertRaises(DomainError):
            ComplexPoly((), self.ctx).normalized()

    def test_arithmetic(self):
        p = ComplexPoly((1, 1), self.ctx)
        square = p * p
        self.assertEqual([complex(c) for c in square.coeffs], [1, 2, 1])
        self.assertEqual((square - p * p).degree, -1)
        self.assertEqual(complex(square(2)), 9)

    def test_roots_recovered(self):
        mp = self.ctx.mp
        expected = [mp.mpc(1), mp.mpc(2), mp.mpc(0, 1), mp.mpc(-1, -3)]
        poly = ComplexPoly.from_roots(expected, self.ctx)
        roots = expand_roots(poly_roots(poly, self.ctx))
        self.assertEqual(len(roots), 4)
        for root in expected:
            self.assertLess(min(abs(root - r) for r in roots), self.ctx.tol(3))

    def test_roots_sorted_by_real_part(self):
        poly = ComplexPoly.from_roots([3, -2, 1], self.ctx)
        values = [float(r.value.real) for r in poly_roots(poly, self.ctx)]
        self.assertEqual(values, sorted(values))

    def test_expand_roots(self):
        tagged = [TaggedRoot(value=1, multiplicity=2), TaggedRoot(value=5)]
        self.assertEqual(expand_roots(tagged), [1, 1, 5])

    def test_degree_zero_rejected(self):
        with self.assertRaises(DomainError):
            poly_roots(ComplexPoly((3,), self.ctx), self.ctx)


class QuadratureTests(SimpleTestCase):
    def setUp(self):
        self.ctx = PrecisionCtx(digits=TEST_DIGITS)

    def test_gauss_rule_exact_for_low_degree(self):
        nodes, weights = gauss_legendre_rule(5, self.ctx)
        mp = self.ctx.mp
        self.assertLess(abs(mp.fsum(w * x ** 8 for x, w in zip(nodes, weights)) - mp.mpf(2) / 9), self.ctx.tol(2))
        self.assertEqual(list(nodes), sorted(nodes))

    def test_segment_polynomial(self):
        mp = self.ctx.mp
        end = mp.mpc(1, 1)
        value = adaptive_quadrature(lambda z: z * z, Segment(mp.mpc(0), end), self.ctx)
        self.assertLess(abs(value - end ** 3 / 3), self.ctx.tol(2))

    def test_inverse_square_root_endpoint(self):
        mp = self.ctx.mp
        value = adaptive_quadrature(lambda z: 1 / mp.sqrt(z), Segment(mp.mpc(0), mp.mpc(1)), self.ctx, singular_start=True)
        self.assertLess(abs(value - 2), self.ctx.tol(2))

    def test_closed_circle_residue(self):
        mp = self.ctx.mp
        value = adaptive_quadrature(lambda z: 1 / z, circle(mp.mpc(0), mp.mpf(1), self.ctx), self.ctx)
        self.assertLess(abs(value - 2j * mp.pi), self.ctx.tol(2))


class TraceTests(SimpleTestCase):
    def setUp(self):
        self.ctx = PrecisionCtx(digits=TEST_DIGITS)

    def test_level_event_stops_trace(self):
        arc = ode_trace(
            lambda z: self.ctx.mpc(1), self.ctx.mpc(0),
            [LevelEvent('unit', lambda z: z.real - 1)], self.ctx, max_step=0.1,
        )
        self.assertEqual(arc.end_label, 'unit')
        self.assertLess(abs(arc.end - 1), self.ctx.tol(4))

    def test_box_event(self):
        arc = ode_trace(lambda z: self.ctx.mpc(1j), self.ctx.mpc(0), [], self.ctx, max_step=0.5, box=2)
        self.assertEqual(arc.end_label, 'box')
        self.assertLess(abs(arc.end - 2j), self.ctx.tol(4))

    def test_arc_polyline_helpers(self):
        arc = ArcPolyline(nodes=(0, 1, 1 + 1j), start_label='a', end_label='b')
        back = arc.reversed()
        self.assertEqual(back.nodes, (1 + 1j, 1, 0))
        self.assertEqual((back.start_label, back.end_label, back.orientation), ('b', 'a', -1))
        joined = arc.joined(ArcPolyline(nodes=(1 + 1j, 2j), end_label='c'))
        self.assertEqual(len(joined), 4)
        self.assertEqual(joined.end_label, 'c')
        self.assertEqual(arc.arclength(), 2)
        self.assertEqual(arc.trajectory_defect(), 0)
