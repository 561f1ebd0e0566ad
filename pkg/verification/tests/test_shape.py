import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from verification.catalog import Ellipsoid, GraphPatch, Sphere, TorusOfRevolution, random_chart_points
from verification.exceptions import InsufficientOrder
from verification.shape import (
    codazzi_asymmetry,
    curvature_at,
    einstein_divergence,
    einstein_identity_residual,
    flux_field_divergence,
    flux_identity_residual,
    geometry,
    invariants_at,
)

ELLIPSOID = Ellipsoid((1.0, 1.3, 0.8, 1.1, 0.9))


def sample(spec, count, order, seed=0):
    return geometry(spec, random_chart_points(spec.chart, count, np.random.default_rng(seed)), order)


class RoundSphereTests(SimpleTestCase):

    @given(st.floats(min_value=0.3, max_value=3.0))
    @settings(max_examples=10, deadline=None)
    def test_invariants(self, radius):
        s = sample(Sphere(radius), 6, 4)
        inv = invariants_at(s)
        k = 1.0 / radius
        np.testing.assert_allclose(s.H.value, -k, rtol=1e-10)
        np.testing.assert_allclose(inv.H4, k ** 4, rtol=1e-9)
        np.testing.assert_allclose(inv.det_h, k ** 4, rtol=1e-9)
        np.testing.assert_allclose(inv.R, 12.0 * k ** 2, rtol=1e-9)
        np.testing.assert_allclose(inv.ric2, 36.0 * k ** 4, rtol=1e-9)
        np.testing.assert_allclose(inv.Q, 6.0 * k ** 4, rtol=1e-8)
        scale = k ** 4
        for name in ('grad_h_sq', 'grad_H_sq', 'h0_4', 'tr_h04', 'W2'):
            np.testing.assert_allclose(inv[name] / scale, 0.0, atol=1e-9, err_msg=name)

    def test_normal_points_outward(self):
        s = sample(Sphere(1.5), 8, 3)
        outward = np.einsum('...A,...A->...', s.n.value, s.frame.position.value)
        self.assertTrue(np.all(outward > 0))
        flipped = geometry(Sphere(1.5), random_chart_points(Sphere().chart, 8, np.random.default_rng(0)), 3, flip=True)
        np.testing.assert_allclose(flipped.H.value, 1.0 / 1.5, rtol=1e-10)

    def test_area_element(self):
        points = random_chart_points(Sphere().chart, 10, np.random.default_rng(1))
        s = geometry(Sphere(2.0), points, 3)
        chi1, chi2, chi3 = points[:, 0], points[:, 1], points[:, 2]
        expected = 16.0 * np.sin(chi1) ** 3 * np.sin(chi2) ** 2 * np.sin(chi3)
        np.testing.assert_allclose(s.frame.sqrt_det_g.value, expected, rtol=1e-12)


class CurvatureTests(SimpleTestCase):

    def test_flat_graph_has_no_curvature(self):
        s = sample(GraphPatch(amplitude=0.0), 5, 3)
        np.testing.assert_allclose(s.h.value, 0.0, atol=1e-14)
        np.testing.assert_allclose(s.frame.g.value, np.broadcast_to(np.eye(4), (5, 4, 4)), atol=1e-14)

    def test_shape_operator_is_symmetric_and_codazzi_holds(self):
        for spec in (ELLIPSOID, TorusOfRevolution(2.0, 1.0), GraphPatch(0.3)):
            s = sample(spec, 8, 3, seed=2)
            np.testing.assert_allclose(s.h.value, np.swapaxes(s.h.value, -1, -2), atol=1e-12)
            self.assertLess(float(np.max(codazzi_asymmetry(s))), 1e-10, spec.label)

    def test_gauss_equation_curvature(self):
        s = sample(ELLIPSOID, 8, 4, seed=3)
        inv = invariants_at(s)
        c = curvature_at(s, order=0)
        g_inv = s.g_inv.value
        # Weyl tensor is trace-free and |W|^2 = 7/3 |h0|^4 - 4 Tr h0^4
        trace = np.einsum('...ik,...ijkl->...jl', g_inv, c.weyl.value)
        np.testing.assert_allclose(trace, 0.0, atol=1e-10)
        np.testing.assert_allclose(inv.W2, 7.0 / 3.0 * inv.h0_4 - 4.0 * inv.tr_h04, rtol=1e-9, atol=1e-10)
        H = s.H.value
        h_sq = np.einsum('...ij,...ji->...', s.shape_operator.value, s.shape_operator.value)
        np.testing.assert_allclose(inv.R, 16.0 * H * H - h_sq, rtol=1e-10)
        self.assertTrue(np.all(inv.W2 > 0))

    def test_divergence_identities(self):
        s = sample(ELLIPSOID, 6, 4, seed=4)
        flux, scale = flux_identity_residual(s)
        self.assertLess(float(np.max(np.abs(flux).max(axis=-1) / scale)), 1e-7)
        residual, scale = einstein_identity_residual(s)
        self.assertLess(float(np.max(np.abs(residual).max(axis=-1) / scale)), 1e-7)
        self.assertLess(float(np.max(np.abs(einstein_divergence(s)))), 1e-7)
        divergence, expected = flux_field_divergence(s)
        np.testing.assert_allclose(divergence, expected, atol=1e-7 * max(1.0, float(np.max(np.abs(expected)))))

    def test_order_requirements(self):
        with self.assertRaises(InsufficientOrder):
            sample(Sphere(), 3, 2)
        s = sample(Sphere(), 3, 3)
        self.assertIsNone(s.lap_H)
        self.assertTrue(np.all(np.isnan(invariants_at(s).Q)))
        with self.assertRaises(InsufficientOrder):
            flux_identity_residual(s)
