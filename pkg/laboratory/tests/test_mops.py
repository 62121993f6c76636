from fractions import Fraction

from django.test import SimpleTestCase

from laboratory.exceptions import DomainError
from laboratory.services.moments import RayPairContour
from laboratory.services.mops import (
    MopIndex, build_mixed_moment_matrix, conjugation_defect, counting_measure, interlace_check, moment_tables,
    orthogonality_residual, real_zeros, rescale_zeros, solve_general_K, solve_mop, solve_type_II,
    varying_weight_polynomial,
)
from laboratory.services.numerics import ComplexPoly, PrecisionCtx, poly_roots

TEST_DIGITS = 60


class MopIndexTests(SimpleTestCase):
    def test_defaults_to_cubic_contours(self):
        index = MopIndex(n=3, m=7)
        self.assertEqual(index.N, 10)
        self.assertEqual(index.alpha_N, Fraction(3, 10))
        self.assertEqual(index.label, 'n3_m7_K3_l0_k2_K3_l1_k2')

    def test_validation(self):
        with self.assertRaises(DomainError):
            MopIndex(n=0, m=0)
        with self.assertRaises(DomainError):
            MopIndex(n=-1, m=3)
        with self.assertRaises(DomainError):
            MopIndex(n=2, m=3, K=5)
        same = RayPairContour(K=5, ell=0, kappa=3)
        with self.assertRaises(DomainError):
            MopIndex(n=2, m=3, K=5, contour_n=same, contour_m=RayPairContour(K=5, ell=3, kappa=0))
        with self.assertRaises(DomainError):
            MopIndex(n=2, m=3, K=5, contour_n=same, contour_m=RayPairContour(K=3, ell=0, kappa=2))


class CubicSolveTests(SimpleTestCase):
    def setUp(self):
        self.ctx = PrecisionCtx(digits=TEST_DIGITS)

    def test_mixed_moment_matrix_layout(self):
        index = MopIndex(n=2, m=3)
        f1, f2 = moment_tables(index, self.ctx)
        H = build_mixed_moment_matrix(index, self.ctx, (f1, f2))
        self.assertEqual((H.rows, H.cols), (5, 5))
        self.assertEqual(H[3, 1], f1[4])
        self.assertEqual(H[3, 2], f2[3])

    def test_both_types_satisfy_conditions(self):
        for n, m in ((1, 2), (2, 4), (3, 3), (4, 6)):
            solution = solve_mop(MopIndex(n=n, m=m), self.ctx)
            self.assertTrue(solution.type_I_exists and solution.type_II_exists, (n, m))
            self.assertTrue(solution.P.monic)
            self.assertEqual(solution.P.degree, n + m)
            self.assertLessEqual(solution.A.degree, n - 1)
            self.assertLessEqual(solution.B.degree, m - 1)
            for name, value in solution.conditioning.residuals.items():
                self.assertLess(value, self.ctx.tol(2), f"{name} at {(n, m)}")

    def test_row_permutation_gives_the_same_polynomial(self):
        index = MopIndex(n=3, m=4)
        tables = moment_tables(index, self.ctx)
        P, _ = solve_type_II(index, self.ctx, tables=tables)
        for order in (list(reversed(range(index.N))), [2, 5, 0, 6, 1, 3, 4]):
            Q, _ = solve_type_II(index, self.ctx, tables=tables, row_order=order)
            self.assertEqual(Q.degree, index.N)
            worst = max(abs(a - b) for a, b in zip(P.coeffs, Q.coeffs))
            self.assertLess(worst, self.ctx.tol(2), order)

    def test_single_weight_degree(self):
        solution = solve_mop(MopIndex(n=0, m=2), self.ctx)
        self.assertIsNone(solution.A)
        self.assertEqual(set(solution.polynomials()), {'P', 'B'})

    def test_real_coefficients_when_n_at_most_m(self):
        solution = solve_mop(MopIndex(n=2, m=4), self.ctx)
        for c in solution.P.coeffs:
            self.assertLess(abs(c.imag), self.ctx.tol(4))
        roots = [r.value for r in poly_roots(solution.P, self.ctx)]
        self.assertLess(conjugation_defect(roots, self.ctx), self.ctx.tol(4))

    def test_residual_flags_wrong_polynomial(self):
        index = MopIndex(n=1, m=1)
        wrong = ComplexPoly((1, 0, 1), self.ctx)
        self.assertGreater(orthogonality_residual(wrong, index, 'typeII', self.ctx).value, 0.01)
        with self.assertRaises(DomainError):
            orthogonality_residual(wrong, index, 'typeIII', self.ctx)


class GeneralKTests(SimpleTestCase):
    def test_quintic_solve(self):
        ctx = PrecisionCtx(digits=TEST_DIGITS)
        index = MopIndex(
            n=2, m=3, K=5,
            contour_n=RayPairContour(K=5, ell=0, kappa=3), contour_m=RayPairContour(K=5, ell=2, kappa=3),
        )
        solution = solve_general_K(index, ctx)
        self.assertEqual(solution.names, ('Q', 'C', 'D'))
        if solution.type_II_exists:
            self.assertLess(solution.conditioning.residuals['typeII'], ctx.tol(2))
        else:
            self.assertIsNotNone(solution.conditioning.singular_step)

    def test_rejects_cubic(self):
        with self.assertRaises(DomainError):
            solve_general_K(MopIndex(n=1, m=1), PrecisionCtx(digits=TEST_DIGITS))


class ZeroTests(SimpleTestCase):
    def setUp(self):
        self.ctx = PrecisionCtx(digits=TEST_DIGITS)

    def test_rescaling(self):
        zeros = rescale_zeros([self.ctx.mpc(8)], 8, 3, self.ctx)
        self.assertLess(abs(zeros[0] - 4), self.ctx.tol(2))
        self.assertEqual(rescale_zeros([self.ctx.mpc(5)], 1, 3, self.ctx), [5])
        with self.assertRaises(DomainError):
            rescale_zeros([], 0, 3, self.ctx)

    def test_varying_weight_polynomial_has_rescaled_zeros(self):
        P = ComplexPoly.from_roots([self.ctx.mpc(8), self.ctx.mpc(-1)], self.ctx)
        varying = varying_weight_polynomial(P, 2, 1, 'typeII', self.ctx)
        self.assertLess(abs(varying.leading - 1), self.ctx.tol(2))
        self.assertLess(abs(varying(4)), self.ctx.tol(2))
        self.assertLess(abs(varying(-0.5)), self.ctx.tol(2))

    def test_counting_measure_is_probability(self):
        solution = solve_mop(MopIndex(n=2, m=3), self.ctx)
        measure = counting_measure(solution.P, 5, self.ctx)
        self.assertEqual(measure.total_mass, 1)
        self.assertEqual(len(measure.points()), 5)
        with self.assertRaises(DomainError):
            counting_measure(ComplexPoly((), self.ctx), 5, self.ctx)

    def test_real_zeros(self):
        mp = self.ctx.mp
        roots = [mp.mpc(2), mp.mpc(-1, mp.mpf(10) ** -40), mp.mpc(0, 1)]
        self.assertEqual([float(x) for x in real_zeros(roots, self.ctx)], [-1.0, 2.0])


class InterlacingTests(SimpleTestCase):
    def test_alternating(self):
        report = interlace_check([1, 3], [0, 2, 4])
        self.assertTrue(report.holds)
        self.assertFalse(report.vacuous)

    def test_violation(self):
        report = interlace_check([1, 2], [0, 3])
        self.assertFalse(report.holds)
        self.assertEqual(report.first_violation['reason'], 'consecutive A zeros')

    def test_window_and_vacuous(self):
        report = interlace_check([1, 5], [10], window=(0, 6))
        self.assertTrue(report.holds)
        self.assertTrue(report.vacuous)
