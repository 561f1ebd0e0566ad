import math
from unittest import mock

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from verification.catalog import (
    ADMISSIBILITY_GRID,
    Dilation,
    Ellipsoid,
    GraphPatch,
    Inversion,
    MobiusImage,
    MobiusTransform,
    Sphere,
    TorusOfRevolution,
    Translation,
    chart_sample_plan,
    mobius_apply,
    random_chart_points,
)
from verification.exceptions import InadmissibleTransform, OpenPatchError, PointOutsideDomain

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


class SurfaceTests(SimpleTestCase):

    @given(seeds, st.floats(min_value=0.2, max_value=5.0))
    @settings(max_examples=20, deadline=None)
    def test_sphere_radius(self, seed, radius):
        spec = Sphere(radius)
        points = random_chart_points(spec.chart, 16, np.random.default_rng(seed))
        values = spec.evaluate(points, 0).value
        np.testing.assert_allclose(np.linalg.norm(values, axis=-1), radius, rtol=1e-13)

    def test_ellipsoid_equation(self):
        axes = (1.0, 1.3, 0.8, 1.1, 0.9)
        spec = Ellipsoid(axes)
        points = random_chart_points(spec.chart, 32, np.random.default_rng(1))
        values = spec.evaluate(points, 0).value
        np.testing.assert_allclose(np.sum((values / np.asarray(axes)) ** 2, axis=-1), 1.0, rtol=1e-13)

    def test_torus_equation(self):
        spec = TorusOfRevolution(2.0, 1.0)
        points = random_chart_points(spec.chart, 32, np.random.default_rng(2))
        values = spec.evaluate(points, 0).value
        radial = np.linalg.norm(values[:, :4], axis=-1) - 2.0
        np.testing.assert_allclose(radial ** 2 + values[:, 4] ** 2, 1.0, rtol=1e-13)

    def test_flat_graph(self):
        spec = GraphPatch(amplitude=0.0)
        points = random_chart_points(spec.chart, 8, np.random.default_rng(3))
        values = spec.evaluate(points, 2).value
        np.testing.assert_allclose(values[:, :4], points)
        np.testing.assert_allclose(values[:, 4], 0.0)

    def test_topology(self):
        self.assertEqual(Sphere().euler_char, 2)
        self.assertEqual(TorusOfRevolution().euler_char, 0)
        self.assertTrue(Ellipsoid().closed)
        self.assertFalse(GraphPatch().closed)
        with self.assertRaises(OpenPatchError):
            GraphPatch().require_closed()

    def test_invalid_parameters(self):
        with self.assertRaises(ValueError):
            Sphere(-1.0)
        with self.assertRaises(ValueError):
            Ellipsoid((1.0, 2.0))
        with self.assertRaises(ValueError):
            TorusOfRevolution(1.0, 2.0)
        with self.assertRaises(ValueError):
            Dilation(0.0)

    def test_points_outside_the_chart(self):
        with self.assertRaises(PointOutsideDomain):
            Sphere().evaluate(np.array([[0.0, 1.0, 1.0, 1.0]]), 1)
        with self.assertRaises(PointOutsideDomain):
            GraphPatch().evaluate(np.array([[0.0, 0.0, 1.5, 0.0]]), 1)

    def test_labels(self):
        self.assertEqual(Sphere(2.0).label, 'sphere(2)')
        self.assertEqual(TorusOfRevolution(2.0, 1.0).label, 'torus(2,1)')
        self.assertEqual(Ellipsoid((1.0, 1.3, 0.8, 1.1, 0.9)).label, 'ellipsoid(1,1.3,0.8,1.1,0.9)')


class MobiusTests(SimpleTestCase):

    def setUp(self):
        self.transform = MobiusTransform((Inversion((0.0, 0.0, 0.0, 0.0, 6.0)), Dilation(1.7)))

    def test_image_matches_pointwise_maps(self):
        spec = TorusOfRevolution(2.0, 1.0)
        image = mobius_apply(self.transform, spec)
        points = random_chart_points(spec.chart, 20, np.random.default_rng(4))
        expected = self.transform.apply_points(spec.evaluate(points, 0).value)
        np.testing.assert_allclose(image.evaluate(points, 3).value, expected, rtol=1e-13, atol=1e-13)
        self.assertEqual(image.euler_char, 0)
        self.assertEqual(image.chart, spec.chart)

    def test_inverted_sphere_is_a_sphere(self):
        image = mobius_apply(MobiusTransform((Inversion((0.0, 0.0, 0.0, 0.0, 3.0)),)), Sphere(1.0))
        points = random_chart_points(image.chart, 20, np.random.default_rng(5))
        values = image.evaluate(points, 0).value
        # inversion about a point at distance 3 maps the unit sphere to a sphere of radius 1/8 centred at 3 - 3/8
        center = np.array([0.0, 0.0, 0.0, 0.0, 3.0 - 3.0 / 8.0])
        np.testing.assert_allclose(np.linalg.norm(values - center, axis=-1), 1.0 / 8.0, rtol=1e-12)

    def test_generators_are_flattened(self):
        once = mobius_apply(MobiusTransform((Translation((1.0, 0.0, 0.0, 0.0, 0.0)),)), Sphere())
        twice = mobius_apply(MobiusTransform((Dilation(2.0),)), once)
        self.assertIsInstance(twice, MobiusImage)
        self.assertEqual(twice.inner, Sphere())
        self.assertEqual(len(twice.transform.generators), 2)
        self.assertEqual(mobius_apply(MobiusTransform.identity(), Sphere()), Sphere())

    def test_centroid_is_sampled_once(self):
        image = mobius_apply(self.transform, Ellipsoid((1.0, 1.3, 0.8, 1.1, 0.9)))
        first = image.centroid()
        expected = image.evaluate(chart_sample_plan(image, ADMISSIBILITY_GRID).points(), 0).value.mean(axis=0)
        np.testing.assert_allclose(first, expected, rtol=1e-14, atol=1e-14)
        with mock.patch.object(MobiusImage, 'evaluate', side_effect=AssertionError('resampled')):
            self.assertIs(image.centroid(), first)
        self.assertFalse(first.flags.writeable)

    def test_center_on_the_surface_is_rejected(self):
        spec = Sphere()
        sample = spec.evaluate(chart_sample_plan(spec, 16).points()[:1], 0).value[0]
        with self.assertRaises(InadmissibleTransform):
            mobius_apply(MobiusTransform((Inversion(tuple(sample)),)), spec)


class QuadratureTests(SimpleTestCase):

    @given(st.integers(min_value=4, max_value=12))
    @settings(max_examples=9, deadline=None)
    def test_weights_sum_to_the_box_volume(self, n):
        for spec in (Sphere(), TorusOfRevolution()):
            plan = chart_sample_plan(spec, n)
            self.assertEqual(len(plan), n ** 4)
            self.assertAlmostEqual(plan.weight_array().sum() / spec.chart.volume, 1.0, places=12)

    def test_chunks_cover_the_grid(self):
        plan = chart_sample_plan(TorusOfRevolution(), 6)
        points = np.concatenate([p for p, _ in plan.chunks(100)])
        weights = np.concatenate([w for _, w in plan.chunks(100)])
        np.testing.assert_array_equal(points, plan.points())
        np.testing.assert_array_equal(weights, plan.weight_array())

    def test_grid_must_have_four_nodes(self):
        with self.assertRaises(ValueError):
            chart_sample_plan(Sphere(), 3)

    def test_random_points_stay_inside(self):
        spec = TorusOfRevolution()
        points = random_chart_points(spec.chart, 200, np.random.default_rng(6))
        self.assertEqual(points.shape, (200, 4))
        spec.chart.check(points)
        self.assertTrue(np.all(points[:, 1] > 0.05 * math.pi - 1e-12))
