from fractions import Fraction

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from verification import exterior
from verification.catalog import Ellipsoid, random_chart_points
from verification.exceptions import DegreeOverflow, DegreeUnderflow, InsufficientOrder
from verification.exterior import (
    DERIVED_SECOND_IDENTITY,
    PRINTED_SECOND_IDENTITY,
    MultiForm,
    PointFrame,
    contraction_suite,
    derivative_checks,
    hodge,
    product,
    random_frames,
    random_traceless,
    return_equation_checks,
    structural_checks,
    traceless_contraction_checks,
)
from verification.shape import geometry

ELLIPSOID = Ellipsoid((1.0, 1.3, 0.8, 1.1, 0.9))
seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


def relative(residual, reference):
    return float(np.max(np.abs(residual))) / max(1.0, float(np.max(np.abs(reference))))


class StructureTests(SimpleTestCase):

    @given(seeds)
    @settings(max_examples=10, deadline=None)
    def test_structural_identities(self, seed):
        rng = np.random.default_rng(seed)
        frame = random_frames(ELLIPSOID, 8, rng)
        for name, residual in structural_checks(frame, rng).items():
            self.assertLess(residual, 1e-10, name)

    def test_derivatives(self):
        for name, residual in derivative_checks(ELLIPSOID, np.random.default_rng(1), count=8).items():
            self.assertLess(residual, 1e-10, name)

    def test_hodge_of_the_volume_form(self):
        frame = PointFrame.from_vectors(np.eye(5)[:4])
        one = MultiForm.scalar(0, np.ones((1,)))
        volume = hodge(one, frame)
        self.assertEqual((volume.p, volume.q), (4, 0))
        self.assertAlmostEqual(float(volume.components[0, 0]), 1.0)
        np.testing.assert_allclose(np.abs(frame.n), [0.0, 0.0, 0.0, 0.0, 1.0], atol=1e-15)

    def test_degree_errors(self):
        rng = np.random.default_rng(2)
        with self.assertRaises(DegreeOverflow):
            product(MultiForm.random(3, 1, rng), MultiForm.random(2, 1, rng))
        with self.assertRaises(DegreeOverflow):
            product(MultiForm.random(1, 3, rng), MultiForm.random(1, 3, rng))
        with self.assertRaises(DegreeUnderflow):
            product(MultiForm.random(1, 1, rng), MultiForm.random(1, 2, rng), 'wedge', 'interior')
        with self.assertRaises(DegreeUnderflow):
            product(MultiForm.random(1, 0, rng), MultiForm.random(1, 0, rng), 'wedge', 'bullet')
        with self.assertRaises(ValueError):
            product(MultiForm.random(2, 1, rng), MultiForm.random(1, 1, rng), 'interior', 'wedge')
        with self.assertRaises(InsufficientOrder):
            exterior.ext_d(MultiForm.random(1, 1, rng))

    def test_component_shape(self):
        with self.assertRaises(ValueError):
            MultiForm(2, 1, np.zeros((6, 4)))
        self.assertEqual(MultiForm.zeros(2, 2, (3,)).components.shape, (3, 6, 10))


class ContractionTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        rng = np.random.default_rng(3)
        cls.frame = random_frames(ELLIPSOID, 12, rng)
        cls.suite = contraction_suite(cls.frame, MultiForm.random(2, 1, rng, cls.frame.batch))

    def test_first_identity(self):
        self.assertLess(relative(self.suite.first_residual, self.suite.A.components), 1e-11)

    def test_second_identity_coefficients(self):
        C = self.suite.C.components
        self.assertLess(relative(self.suite.second_residual(DERIVED_SECOND_IDENTITY), C), 1e-11)
        self.assertGreater(relative(self.suite.second_residual(PRINTED_SECOND_IDENTITY), C), 1e-3)

    def test_recovered_coefficients(self):
        coefficients, rational, fit, rank = self.suite.recover()
        self.assertEqual(rank, 4)
        self.assertLess(fit, 1e-10)
        self.assertEqual(rational, DERIVED_SECOND_IDENTITY)
        np.testing.assert_allclose(coefficients, [float(c) for c in DERIVED_SECOND_IDENTITY], atol=1e-9)


class TracelessContractionTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(4)
        self.frame = random_frames(ELLIPSOID, 10, self.rng)

    def test_bullet_identities(self):
        h0 = random_traceless(self.frame, self.rng)
        u0 = MultiForm.random(1, 2, self.rng, self.frame.batch)
        out = traceless_contraction_checks(self.frame, h0, u0, mu=0.7, lam=-1.3)
        scale = max(1.0, float(np.max(np.abs(h0)))) ** 3
        for key in ('bullet_eta_normal', 'traceless_h0', 'traceless_h0_cubed', 'trace_contraction',
                    'normal_bullet_tangent', 'traceless_h0_tangent', 'traceless_h0_cubed_tangent',
                    'lemma_dot', 'lemma_tangent', 'lemma_bullet_recovered'):
            self.assertLess(out[key] / scale, 1e-10, key)
        self.assertAlmostEqual(out['lemma_bullet_multiplier'], -1.0, places=10)
        self.assertGreater(out['lemma_bullet_printed'] / scale, 1e-3)

    def test_trace_is_rejected(self):
        h0 = random_traceless(self.frame, self.rng) + np.eye(4)
        with self.assertRaises(ValueError):
            traceless_contraction_checks(self.frame, h0, MultiForm.zeros(1, 2, self.frame.batch))

    def test_p_operator_is_injective(self):
        ell = self.rng.standard_normal(self.frame.batch + (4, 5))
        back = exterior.p_inverse(exterior.p_operator(ell, self.frame), self.frame)
        self.assertLess(relative(back - ell, ell), 1e-10)
        self.assertTrue(np.all(exterior.p_operator_bound(self.frame) > 1e-8))


class ReturnEquationTests(SimpleTestCase):

    def test_normal_coefficient(self):
        rng = np.random.default_rng(5)
        s = geometry(ELLIPSOID, random_chart_points(ELLIPSOID.chart, 8, rng), 4)
        out = return_equation_checks(s, rng)
        self.assertLess(out['symmetric_contraction'], 1e-12)
        self.assertLess(out['df_explicit'], 1e-8)
        self.assertEqual(Fraction(out['normal_coefficient']).limit_denominator(64), Fraction(-1, 2))

    def test_order(self):
        s = geometry(ELLIPSOID, random_chart_points(ELLIPSOID.chart, 2, np.random.default_rng(0)), 3)
        with self.assertRaises(InsufficientOrder):
            return_equation_checks(s, np.random.default_rng(0))
