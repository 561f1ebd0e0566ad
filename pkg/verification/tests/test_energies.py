import math

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from verification.catalog import (
    Dilation,
    Ellipsoid,
    GraphPatch,
    Inversion,
    MobiusTransform,
    Sphere,
    TorusOfRevolution,
    random_chart_points,
)
from verification.energies import (
    EA,
    EA_RECONCILED,
    EB,
    EB_PRINTED,
    EC,
    EWM,
    SPHERE_VOLUME,
    CoefficientVector,
    gauss_bonnet_check,
    get_preset,
    integrate,
    integrate_fields,
    pointwise_density_ratio,
    q_curvature_at,
    reduce_coefficients,
    sphere_closed_form,
)
from verification.exceptions import ConfigError, OpenPatchError
from verification.shape import geometry

PI2 = math.pi ** 2
ELLIPSOID = Ellipsoid((1.0, 1.3, 0.8, 1.1, 0.9))
TRANSFORM = MobiusTransform((Inversion((0.0, 0.0, 0.0, 0.0, 6.0)), Dilation(1.7)))


class PresetTests(SimpleTestCase):

    @given(st.floats(min_value=0.2, max_value=5.0))
    @settings(max_examples=20, deadline=None)
    def test_sphere_closed_forms(self, radius):
        self.assertAlmostEqual(sphere_closed_form(EC, radius) / (96.0 * PI2), 1.0, places=12)
        self.assertAlmostEqual(sphere_closed_form(EA, radius) / (-88.0 * PI2 / 3.0), 1.0, places=12)
        self.assertAlmostEqual(sphere_closed_form(EB_PRINTED, radius) / (-8.0 * PI2), 1.0, places=12)
        self.assertAlmostEqual(sphere_closed_form(EB, radius), 0.0, places=12)

    def test_reduction(self):
        self.assertTrue(EA_RECONCILED.reduced().is_conformal())
        self.assertFalse(EA.reduced().is_conformal())
        self.assertTrue(EC.reduced().is_conformal())
        self.assertTrue(EWM.reduced().is_conformal())
        reduced = EB.reduced()
        self.assertAlmostEqual(reduced.mu, 7.0 / 6.0)
        self.assertAlmostEqual(reduced.lam, -2.0)
        ec = reduce_coefficients(CoefficientVector(1.0, 0.0, 0.0, 0.0, 0.0, -6.0, 60.0))
        np.testing.assert_allclose(ec.as_array(), [16.0, 2.5, -3.0, -12.0, -16.0, 112.0])

    def test_get_preset(self):
        self.assertIs(get_preset('EC'), EC)
        self.assertEqual(get_preset('E3:1,0,0').weights, {'h0_4': 1.0, 'tr_h04': 0.0, 'det_h': 0.0})
        self.assertEqual(get_preset('generic:1,0,0,0,0,-6,60').weights, {'grad_h_sq': 1.0, 'H2_h2': -6.0, 'H4': 60.0})
        for name in ('EZ', 'E3:1,0', 'E3:a,b,c', 'generic:1,2'):
            with self.assertRaises(ConfigError, msg=name):
                get_preset(name)

    def test_preset_algebra(self):
        combined = EC + EA.scaled(2.0)
        self.assertEqual(combined.weights['H2_h2'], -8.0)
        self.assertEqual(combined.weights['grad_H_sq'], 2.0)
        self.assertEqual(get_preset('Q').order, 4)
        self.assertEqual(EC.order, 3)


class QuadratureTests(SimpleTestCase):

    def test_sphere_volume(self):
        volume = integrate_fields(Sphere(1.0), 12, lambda s: np.ones_like(s.H.value))
        self.assertAlmostEqual(volume / SPHERE_VOLUME, 1.0, places=9)

    def test_closed_form_energies(self):
        for radius in (0.5, 2.0):
            result = integrate(Sphere(radius), EC, n=16)
            self.assertAlmostEqual(result.value / (96.0 * PI2), 1.0, places=8)
            self.assertLess(result.relative_error, 1e-6)
            self.assertEqual(result.grid, 16)

    def test_gauss_bonnet(self):
        sphere = gauss_bonnet_check(Sphere(1.0), n=12)
        self.assertLess(sphere.relative, 1e-8)
        torus = gauss_bonnet_check(TorusOfRevolution(2.0, 1.0), n=12)
        self.assertEqual(torus.expected, 0.0)
        self.assertLess(torus.residual, 1e-8)

    def test_open_patch_is_rejected(self):
        with self.assertRaises(OpenPatchError):
            integrate(GraphPatch(), EC, n=4)


class PointwiseDensityTests(SimpleTestCase):

    def test_conformal_densities_are_pointwise_invariant(self):
        points = random_chart_points(ELLIPSOID.chart, 12, np.random.default_rng(8))
        for name, (original, image) in pointwise_density_ratio(ELLIPSOID, TRANSFORM, points).items():
            np.testing.assert_allclose(image, original, rtol=1e-8, atol=1e-12, err_msg=name)

    def test_q_curvature_expansion(self):
        s = geometry(ELLIPSOID, random_chart_points(ELLIPSOID.chart, 6, np.random.default_rng(9)), 4)
        q = q_curvature_at(s)
        scale = max(1.0, float(np.max(np.abs(q.intrinsic))))
        np.testing.assert_allclose(q.reconciled, q.intrinsic, atol=1e-8 * scale)
        self.assertGreater(float(np.max(np.abs(q.printed - q.intrinsic))), 1e-6)
