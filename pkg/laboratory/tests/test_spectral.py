from fractions import Fraction

from django.test import SimpleTestCase

from laboratory.exceptions import BranchLabelError, ConvergenceError, DomainError
from laboratory.services.geometry import transition_event_probe
from laboratory.services.measures import real_axis_triple
from laboratory.services.numerics import PrecisionCtx
from laboratory.services.spectral import (
    CRITICAL, INTERMEDIATE, SUBCRITICAL, SUPERCRITICAL, TAU0, TransitionConstants, alpha_of_tau, c_of_alpha,
    classify_regime, cubic_roots, curve_polynomials, discriminant, discriminant_closed_form, ordering_holds,
    ordering_rules, spectral_curve, tau_of_alpha, xi_at, _bisect, find_transition_taus,
)

TEST_DIGITS = 60


class CurveCoefficientTests(SimpleTestCase):
    def setUp(self):
        self.ctx = PrecisionCtx(digits=TEST_DIGITS)

    def test_tau_alpha_inverse(self):
        tau = tau_of_alpha(Fraction(3, 10), self.ctx)
        self.assertLess(abs(tau - self.ctx.mpf('0.21')), self.ctx.tol())
        self.assertLess(abs(alpha_of_tau(tau, self.ctx) - self.ctx.mpf('0.3')), self.ctx.tol(2))

    def test_c_vanishes_at_half(self):
        self.assertEqual(c_of_alpha(Fraction(1, 2), self.ctx), 0)
        self.assertLess(c_of_alpha(Fraction(1, 5), self.ctx), 0)
        with self.assertRaises(DomainError):
            c_of_alpha(Fraction(3, 5), self.ctx)

    def test_discriminant_matches_closed_form(self):
        for alpha in (Fraction(3, 20), Fraction(3, 10), Fraction(19, 50)):
            R, D = curve_polynomials(alpha, self.ctx)
            generic = discriminant(R, D)
            closed = discriminant_closed_form(alpha, self.ctx)
            self.assertEqual(generic.degree, 6)
            difference = generic - closed
            worst = max((abs(c) for c in difference.coeffs), default=0)
            self.assertLess(worst, self.ctx.tol(2) * closed.coefficient_scale(), alpha)

    def test_cubic_roots_solve_the_curve(self):
        mp = self.ctx.mp
        R, D = mp.mpc(3, 1), mp.mpc(-1, 2)
        for xi in cubic_roots(R, D, self.ctx):
            self.assertLess(abs(xi ** 3 - R * xi + D), self.ctx.tol(2))
        self.assertEqual(cubic_roots(0, 0, self.ctx), (0, 0, 0))


class RegimeTests(SimpleTestCase):
    def setUp(self):
        self.ctx = PrecisionCtx(digits=TEST_DIGITS)
        self.transitions = TransitionConstants.reference(self.ctx)

    def test_reference_constants(self):
        self.assertLess(abs(self.transitions.tau0 - self.ctx.mpf(1) / 12), self.ctx.tol())
        self.assertLess(abs(self.transitions.tau2 - self.ctx.mpf('0.2289556')), 1e-6)
        self.assertEqual(self.transitions.as_dict(self.ctx)['source'], 'reference')

    def test_regimes_and_bands(self):
        cases = (
            (Fraction(1, 20), SUBCRITICAL, '0-tau0'),
            (Fraction(3, 20), SUBCRITICAL, 'tau0-tauc'),
            (Fraction(3, 10), INTERMEDIATE, 'tauc-tau2'),
            (Fraction(2, 5), SUPERCRITICAL, 'tau2-quarter'),
        )
        for alpha, regime, band in cases:
            info = classify_regime(alpha, self.transitions, self.ctx)
            self.assertEqual((info.regime, info.tau_band), (regime, band), alpha)

    def test_critical_alpha(self):
        info = classify_regime(self.transitions.alpha_c, self.transitions, self.ctx)
        self.assertTrue(info.critical)
        self.assertEqual(info.regime, CRITICAL)


class BranchPointTests(SimpleTestCase):
    def setUp(self):
        self.ctx = PrecisionCtx(digits=TEST_DIGITS)

    def test_branch_point_layout(self):
        for alpha in (Fraction(3, 20), Fraction(3, 10), Fraction(19, 50)):
            curve = spectral_curve(alpha, self.ctx)
            self.assertLess(curve.a1, curve.b1)
            self.assertLess(curve.b1, curve.b_star)
            self.assertLess(curve.a2.imag, 0)
            self.assertEqual(curve.b2, curve.a2.conjugate())
            self.assertFalse(curve.coalescent)
            disc = discriminant(curve.R, curve.D)
            for point in curve.singular_points:
                self.assertLess(abs(disc(point)), self.ctx.tol(2) * disc.coefficient_scale() * max(1, abs(point)) ** 6)

    def test_node_is_double_root(self):
        curve = spectral_curve(Fraction(3, 10), self.ctx)
        d_disc = discriminant(curve.R, curve.D).derivative()
        self.assertLess(abs(d_disc(curve.b_star)), self.ctx.tol(3) * d_disc.coefficient_scale())

    def test_coalescent_value(self):
        alpha = alpha_of_tau(TAU0, self.ctx)
        curve = spectral_curve(alpha, self.ctx)
        self.assertTrue(curve.coalescent)
        self.assertEqual(curve.b1, curve.b_star)

    def test_alpha_domain(self):
        with self.assertRaises(DomainError):
            spectral_curve(Fraction(1, 2), self.ctx)
        with self.assertRaises(DomainError):
            spectral_curve(0, self.ctx)

    def test_as_dict(self):
        summary = spectral_curve(Fraction(3, 10), self.ctx).as_dict(digits=10)
        self.assertEqual(summary['regime'], INTERMEDIATE)
        self.assertEqual(set(summary['branch_points']), {'a1', 'b1', 'a2', 'b2'})


class BranchLabelTests(SimpleTestCase):
    def setUp(self):
        self.ctx = PrecisionCtx(digits=TEST_DIGITS)
        self.curve = spectral_curve(Fraction(3, 10), self.ctx)

    def test_labels_at_infinity(self):
        mp = self.ctx.mp
        z = mp.mpc(12, 5)
        triple = xi_at(z, self.curve, self.ctx)
        self.assertLess(abs(triple.xi1 - 2 * z * z), 1)
        gap = (1 - 2 * self.curve.alpha) / 3
        self.assertLess(abs(z * (triple.xi2 + z * z) - self.curve.alpha), gap)
        self.assertLess(abs(z * (triple.xi3 + z * z) - (1 - self.curve.alpha)), gap)
        self.assertLess(triple.symmetric_residual(self.curve), self.ctx.tol(2))

    def test_conjugation_symmetry(self):
        mp = self.ctx.mp
        z = mp.mpc(9, 7)
        triple = xi_at(z, self.curve, self.ctx)
        mirrored = xi_at(z.conjugate(), self.curve, self.ctx)
        for a, b in zip(triple.conjugated().xi, mirrored.xi):
            self.assertLess(abs(a - b), self.ctx.tol(4))

    def test_continuation_to_interior(self):
        mp = self.ctx.mp
        seed = xi_at(mp.mpc(0, 10), self.curve, self.ctx)
        triple = xi_at(mp.mpc('0.3', 2), self.curve, self.ctx, seed_labels=seed)
        self.assertLess(triple.symmetric_residual(self.curve), self.ctx.tol(2))

    def test_interior_needs_seed(self):
        with self.assertRaises(BranchLabelError):
            xi_at(self.ctx.mpc(0.5j), self.curve, self.ctx)
        with self.assertRaises(DomainError):
            xi_at(self.curve.a2, self.curve, self.ctx)

    def test_real_orderings_right_of_b1(self):
        for lower, upper, order in ordering_rules(self.curve):
            x = lower + 1 if upper == self.ctx.mp.inf else (lower + upper) / 2
            triple = real_axis_triple(x, self.curve, self.ctx)
            self.assertTrue(ordering_holds(triple, order, self.ctx))


class TransitionDetectionTests(SimpleTestCase):
    def setUp(self):
        self.ctx = PrecisionCtx(digits=TEST_DIGITS)
        self.mp = self.ctx.mp
        self.reference = TransitionConstants.reference(self.ctx)

    def event(self, tau, which):
        return transition_event_probe(self.mp.mpf(tau), which, self.ctx)

    def test_unknown_transition(self):
        with self.assertRaises(DomainError):
            self.event('0.19', 'tau9')

    def test_tau_c_sign_change(self):
        tau_c = self.reference.tau_c
        self.assertLess(self.event(tau_c - self.mp.mpf('1e-3'), 'tau_c'), 0)
        self.assertGreater(self.event(tau_c + self.mp.mpf('1e-3'), 'tau_c'), 0)

    def test_tau_c_consistent_near_the_transition(self):
        tau_c = self.reference.tau_c
        below = self.event(tau_c - self.mp.mpf('1e-6'), 'tau_c')
        above = self.event(tau_c + self.mp.mpf('1e-6'), 'tau_c')
        self.assertLess(below, 0)
        self.assertGreater(above, 0)
        self.assertLess(max(abs(below), abs(above)), 1e-3)

    def test_tau2_bracket(self):
        low, high = self.event('0.22', 'tau2'), self.event('0.235', 'tau2')
        self.assertNotEqual(low > 0, high > 0)
        tau2 = self.reference.tau2
        near_low = self.event(tau2 - self.mp.mpf('1e-3'), 'tau2')
        near_high = self.event(tau2 + self.mp.mpf('1e-3'), 'tau2')
        self.assertEqual(near_low > 0, low > 0)
        self.assertEqual(near_high > 0, high > 0)

    def test_bisection_needs_a_sign_change(self):
        with self.assertRaises(ConvergenceError) as cm:
            _bisect(lambda tau: self.mp.mpf(1), 0, 1, self.ctx, 'flat')
        self.assertEqual(len(cm.exception.estimates), 2)
        root, trace = _bisect(lambda tau: tau - self.mp.mpf('0.3'), 0, 1, self.ctx, 'linear')
        self.assertLess(abs(root - self.mp.mpf('0.3')), 1e-8)
        self.assertGreater(len(trace), 20)

    def test_find_tau_c(self):
        transitions = find_transition_taus(self.ctx, which=('tau_c',), brackets={'tau_c': (0.1913, 0.1914)})
        self.assertEqual(transitions.source, 'computed')
        self.assertLess(abs(transitions.tau_c - self.reference.tau_c), 5e-7)
        self.assertIn('tau_c', transitions.trace)
