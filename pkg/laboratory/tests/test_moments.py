import os
import tempfile
from fractions import Fraction

from django.test import SimpleTestCase

from laboratory.exceptions import DomainError, MomentTableError
from laboratory.services.moments import (
    GAMMA_1, GAMMA_2, MomentCache, MomentTable, RayPairContour, moment_cubic, moment_general,
    printed_cubic_moment, verify_moment_by_quadrature,
)
from laboratory.services.numerics import PrecisionCtx, gamma_rational

TEST_DIGITS = 60


class RayPairContourTests(SimpleTestCase):
    def test_validation(self):
        with self.assertRaises(DomainError):
            RayPairContour(K=2, ell=0, kappa=1)
        with self.assertRaises(DomainError):
            RayPairContour(K=3, ell=1, kappa=1)
        with self.assertRaises(DomainError):
            RayPairContour(K=5, ell=0, kappa=5)

    def test_ray_angles_are_principal(self):
        ctx = PrecisionCtx(digits=TEST_DIGITS)
        mp = ctx.mp
        self.assertLess(abs(GAMMA_1.ray_angle(2, ctx) + 2 * mp.pi / 3), ctx.tol())
        self.assertLess(abs(GAMMA_2.ray_angle(1, ctx) - 2 * mp.pi / 3), ctx.tol())

    def test_vanishing_indices(self):
        self.assertTrue(GAMMA_1.vanishes(2))
        self.assertFalse(GAMMA_1.vanishes(0))
        self.assertTrue(RayPairContour(K=5, ell=0, kappa=3).vanishes(4))


class ClosedFormTests(SimpleTestCase):
    def setUp(self):
        self.ctx = PrecisionCtx(digits=TEST_DIGITS)

    def test_zero_moments_exact(self):
        for k in (2, 5, 8, 29):
            self.assertEqual(moment_cubic('gamma1', k, self.ctx), 0)
            self.assertEqual(moment_cubic('gamma2', k, self.ctx), 0)

    def test_gamma2_matches_customary_form(self):
        for k in range(12):
            difference = abs(moment_cubic('gamma2', k, self.ctx) - printed_cubic_moment('gamma2', k, self.ctx))
            self.assertLess(difference, self.ctx.tol(2), k)

    def test_gamma1_is_minus_conjugate_of_customary_form(self):
        for k in range(12):
            contour = moment_cubic('gamma1', k, self.ctx)
            printed = printed_cubic_moment('gamma1', k, self.ctx)
            self.assertLess(abs(contour + printed.conjugate()), self.ctx.tol(2), k)

    def test_gamma2_purely_imaginary(self):
        for k in range(20):
            value = moment_cubic('gamma2', k, self.ctx)
            self.assertLessEqual(abs(value.real), self.ctx.tol(2) * abs(value), k)

    def test_first_moment(self):
        mp = self.ctx.mp
        expected = (1 - mp.expj(-2 * mp.pi / 3)) * gamma_rational(Fraction(1, 3), self.ctx) / 3
        self.assertLess(abs(moment_general(GAMMA_1, 0, self.ctx) - expected), self.ctx.tol(2))

    def test_negative_index(self):
        with self.assertRaises(DomainError):
            moment_general(GAMMA_1, -1, self.ctx)
        with self.assertRaises(DomainError):
            moment_cubic('gamma3', 0, self.ctx)

    def test_quadrature_agrees(self):
        for contour, k in ((GAMMA_1, 0), (GAMMA_2, 4), (GAMMA_1, 9), (RayPairContour(K=5, ell=0, kappa=3), 3)):
            self.assertLess(verify_moment_by_quadrature(contour, k, self.ctx), self.ctx.tol(3), contour.label)


class MomentTableTests(SimpleTestCase):
    def setUp(self):
        self.ctx = PrecisionCtx(digits=TEST_DIGITS)
        self.directory = tempfile.TemporaryDirectory()
        self.addCleanup(self.directory.cleanup)
        self.cache = MomentCache(self.directory.name)

    def test_table_bounds(self):
        table = MomentTable.build(GAMMA_2, 5, self.ctx)
        self.assertEqual(table.k_max, 5)
        with self.assertRaises(MomentTableError) as caught:
            table[6]
        self.assertEqual(caught.exception.required_k_max, 6)
        with self.assertRaises(MomentTableError):
            table.require(10)

    def test_cache_round_trip(self):
        built = self.cache.build(GAMMA_1, 8, self.ctx)
        loaded = self.cache.load(GAMMA_1, self.ctx)
        self.assertEqual(loaded.k_max, 8)
        for k in range(9):
            self.assertLess(abs(loaded[k] - built[k]), self.ctx.error_bound)
        self.assertEqual(self.cache.tables(), [os.path.basename(self.cache.path(GAMMA_1, self.ctx))])

    def test_other_precision_ignored(self):
        self.cache.build(GAMMA_1, 4, self.ctx)
        other = PrecisionCtx(digits=TEST_DIGITS, guard_digits=12)
        self.assertIsNone(self.cache.load(GAMMA_1, other))

    def test_short_table_rebuilt(self):
        self.cache.build(GAMMA_2, 3, self.ctx)
        self.assertIsNone(self.cache.load(GAMMA_2, self.ctx, k_max=6))
        self.assertEqual(self.cache.load_or_build(GAMMA_2, 6, self.ctx).k_max, 6)

    def test_verify_detects_tampering(self):
        self.cache.build(GAMMA_2, 10, self.ctx)
        self.assertTrue(self.cache.verify(GAMMA_2, self.ctx)['ok'])
        path = self.cache.path(GAMMA_2, self.ctx)
        payload = self.cache.store.load(path)
        payload['values'][1]['im'] = '1.5'
        self.cache.store.dump(path, payload)
        result = self.cache.verify(GAMMA_2, self.ctx)
        self.assertFalse(result['ok'])
        self.assertFalse(result['identical'])

    def test_verify_missing(self):
        self.assertFalse(self.cache.verify(GAMMA_1, self.ctx)['ok'])

    def test_purge(self):
        self.cache.build(GAMMA_1, 2, self.ctx)
        self.cache.build(GAMMA_2, 2, self.ctx)
        self.assertEqual(self.cache.purge(GAMMA_1), 1)
        self.assertEqual(self.cache.purge(), 1)
        self.assertEqual(self.cache.tables(), [])
