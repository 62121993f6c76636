from django.test import SimpleTestCase

from laboratory.exceptions import DomainError
from laboratory.services.geometry import BranchAtlas, hausdorff_to_support
from laboratory.services.spectral import INTERMEDIATE, SUBCRITICAL, SUPERCRITICAL, coalescing_pairs
from laboratory.tests.fixtures import (
    INTERMEDIATE_ALPHA, SUBCRITICAL_ALPHA, SUPERCRITICAL_ALPHA, geometry_ctx, supports_at,
)


class SubcriticalSupportTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.ctx = geometry_ctx()
        cls.supports = supports_at(SUBCRITICAL_ALPHA)
        cls.curve = cls.supports.curve

    def test_regime_and_pieces(self):
        self.assertEqual(self.supports.regime, SUBCRITICAL)
        self.assertLess(self.supports.a_star, self.curve.a1)
        self.assertIsNone(self.supports.delta3)
        self.assertEqual(self.supports.delta1, (self.curve.a1, self.curve.b1))
        self.assertEqual(self.supports.E_alpha, (self.supports.delta2,))
        self.assertIsNone(self.supports.a_B)

    def test_delta2_endpoints_and_symmetry(self):
        delta2 = self.supports.delta2
        self.assertEqual(delta2.start, self.curve.a2)
        self.assertEqual(delta2.end, self.curve.b2)
        nodes = delta2.nodes
        for k in range(len(nodes)):
            self.assertLess(abs(nodes[k] - nodes[-1 - k].conjugate()), self.ctx.tol(8))
        split = delta2.meta['split']
        self.assertLess(abs(nodes[split].imag), self.ctx.tol(4))

    def test_trajectory_level(self):
        self.assertLess(self.supports.delta2.trajectory_defect(), 1e-8)

    def test_mu2_mass_in_range(self):
        mass = self.supports.mu2_mass()
        self.assertGreater(mass, 0)
        self.assertLess(mass, 1)

    def test_hausdorff(self):
        mp = self.ctx.mp
        midpoint = (self.curve.a1 + self.curve.b1) / 2
        on_support = [midpoint, self.supports.delta2.nodes[3], self.curve.b2]
        self.assertLess(hausdorff_to_support(on_support, self.supports), 1e-12)
        self.assertGreater(hausdorff_to_support([mp.mpc(5, 5)], self.supports), 4)
        with self.assertRaises(DomainError):
            hausdorff_to_support([], self.supports)
        with self.assertRaises(DomainError):
            self.supports.segments(('delta4',))

    def test_branch_atlas_labels(self):
        atlas = BranchAtlas(self.supports, self.ctx)
        mp = self.ctx.mp
        z = mp.mpc('0.4', '1.3')
        triple = atlas.labels(z)
        self.assertLess(triple.symmetric_residual(self.curve), self.ctx.tol(2))
        mirrored = atlas.labels(z.conjugate())
        for a, b in zip(triple.conjugated().xi, mirrored.xi):
            self.assertLess(abs(a - b), self.ctx.tol(4))

    def test_boundary_pairing_on_delta1(self):
        atlas = BranchAtlas(self.supports, self.ctx)
        mp = self.ctx.mp
        pair = coalescing_pairs(self.curve, subcritical=True)['b1']
        x = (2 * self.curve.a1 + 3 * self.curve.b1) / 5
        self.assertLess(atlas.boundary_pairing_defect(mp.mpc(x), mp.mpc(0, 1), pair), 1e-8)


class IntermediateSupportTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.ctx = geometry_ctx()
        cls.supports = supports_at(INTERMEDIATE_ALPHA)
        cls.curve = cls.supports.curve

    def test_regime_and_cuts(self):
        self.assertEqual(self.supports.regime, INTERMEDIATE)
        self.assertLess(self.curve.a1, self.supports.a_star)
        self.assertLess(self.supports.a_star, self.curve.b1)
        self.assertEqual(self.supports.delta1, (self.supports.a_star, self.curve.b1))
        self.assertEqual(self.supports.delta3, (self.curve.a1, self.supports.a_star))

    def test_E_alpha_pieces(self):
        supports = self.supports
        self.assertEqual(len(supports.E_alpha), 4)
        self.assertIsNotNone(supports.a_B)
        self.assertLess(supports.a_B.imag, 0)
        self.assertEqual(supports.gamma_L.start, self.curve.a1)
        self.assertLess(supports.meta['tangent_mismatch'], 1e-4)
        self.assertGreater(len(supports.omega_boundary), 3)

    def test_omega_lies_below_axis(self):
        boundary = self.supports.omega_boundary
        self.assertTrue(all(complex(z).imag <= 1e-12 for z in boundary))
        self.assertFalse(self.supports.point_in_omega(complex(self.curve.a1) + 1j))


class SupercriticalSupportTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.supports = supports_at(SUPERCRITICAL_ALPHA)
        cls.curve = cls.supports.curve

    def test_gamma_R_reaches_a1(self):
        supports = self.supports
        self.assertEqual(supports.regime, SUPERCRITICAL)
        self.assertIsNone(supports.a_B)
        self.assertEqual(supports.gamma_R.end, self.curve.a1)
        self.assertEqual(supports.gamma_L.nodes, tuple(reversed(supports.gamma_R.nodes)))
        self.assertEqual(len(supports.E_alpha), 2)
