import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from verification.catalog import Ellipsoid, Sphere, TorusOfRevolution, random_chart_points
from verification.exceptions import BumpSupportError, ConfigError, InsufficientOrder
from verification.jets import Jet
from verification.noether import (
    ATOMS,
    TABLE_ATOMS,
    Bump,
    LagrangianSpec,
    bump_profile,
    e_alpha_beta,
    e_family,
    get_lagrangian,
    lagrangian_partials,
    lagrangian_value,
    muller_fields,
    noether_table,
    trace_checks,
)
from verification.shape import geometry

ELLIPSOID = Ellipsoid((1.0, 1.3, 0.8, 1.1, 0.9))
STEP = 1e-6


def random_point(rng):
    """A positive definite g, a symmetric h and a totally symmetric grad h."""
    a = rng.standard_normal((4, 4))
    g = a @ a.T + 4.0 * np.eye(4)
    h = rng.standard_normal((4, 4))
    h = h + h.T
    t = rng.standard_normal((4, 4, 4))
    grad_h = sum(np.transpose(t, axes) for axes in ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)))
    return g, h, grad_h / 6.0


def symmetric(rng, shape):
    e = rng.standard_normal(shape)
    return 0.5 * (e + np.swapaxes(e, -1, -2))


def central_difference(f, x, e):
    return (f(x + STEP * e) - f(x - STEP * e)) / (2.0 * STEP)


class PartialDerivativeTests(SimpleTestCase):
    """Closed-form partials against finite differences of the Lagrangian."""

    @given(st.sampled_from(ATOMS), st.integers(min_value=0, max_value=2 ** 32 - 1))
    @settings(max_examples=60, deadline=None)
    def test_partials_match_finite_differences(self, atom, seed):
        rng = np.random.default_rng(seed)
        L = LagrangianSpec(atom, {atom: 1.0})
        g, h, grad_h = random_point(rng)
        p = lagrangian_partials(L, g, np.linalg.inv(g), h, grad_h)

        e_g = symmetric(rng, (4, 4))
        fd = central_difference(lambda x: lagrangian_value(L, x, h, grad_h), g, e_g)
        scale = max(1.0, abs(float(p.value)))
        self.assertAlmostEqual(float(np.sum(p.d_g * e_g)) / scale, fd / scale, delta=1e-5)

        e_h = symmetric(rng, (4, 4))
        fd = central_difference(lambda x: lagrangian_value(L, g, x, grad_h), h, e_h)
        self.assertAlmostEqual(float(np.sum(p.d_h * e_h)) / scale, fd / scale, delta=1e-5)

        if p.K is not None:
            _, _, e_grad = random_point(rng)
            fd = central_difference(lambda x: lagrangian_value(L, g, h, x), grad_h, e_grad)
            self.assertAlmostEqual(float(np.sum(p.K * e_grad)) / scale, fd / scale, delta=1e-5)

    def test_value_of_the_determinant(self):
        rng = np.random.default_rng(11)
        g, h, grad_h = random_point(rng)
        value = lagrangian_value(get_lagrangian('det_h'), g, h, grad_h)
        self.assertAlmostEqual(float(value), float(np.linalg.det(np.linalg.inv(g) @ h)), places=10)


class LagrangianRegistryTests(SimpleTestCase):

    def test_named_lagrangians(self):
        self.assertEqual(get_lagrangian('H4').weights, {'H4': 1.0})
        self.assertEqual(get_lagrangian('E_alpha_beta:-6,60').weights, {'grad_h_sq': 1.0, 'H2_h2': -6.0, 'H4': 60.0})
        family = get_lagrangian('E_family:1,2,3,0.5,-0.25')
        self.assertEqual(family.family, 'E_family')
        self.assertEqual(family.weights['H4'], 3.0 - 7.0)
        self.assertTrue(get_lagrangian('generic:1,0,0,0,0,0,0').has_gradient)
        self.assertFalse(get_lagrangian('tr_h04').has_gradient)

    def test_unknown_lagrangians(self):
        for name in ('nope', 'E_alpha_beta:1', 'E_family:1,2', 'generic:1,2,3', 'E_alpha_beta:a,b'):
            with self.assertRaises(ConfigError, msg=name):
                get_lagrangian(name)


class StressTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        rng = np.random.default_rng(12)
        cls.shapes = [geometry(spec, random_chart_points(spec.chart, 6, rng), 4)
                      for spec in (ELLIPSOID, TorusOfRevolution(2.0, 1.0))]

    def assertSmall(self, difference, reference, tolerance, msg=None):
        scale = max(1.0, float(np.max(np.abs(reference))))
        self.assertLess(float(np.max(np.abs(difference))) / scale, tolerance, msg)

    def test_table_rows(self):
        for s in self.shapes:
            for atom in TABLE_ATOMS:
                fields = muller_fields(LagrangianSpec(atom, {atom: 1.0}), s)
                T, F = noether_table(atom, s)
                self.assertSmall(fields.T.value - T, T, 1e-9, atom)
                self.assertSmall(fields.F.value - F, F, 1e-9, atom)

    def test_determinant_has_no_stress(self):
        for s in self.shapes:
            fields = muller_fields(get_lagrangian('det_h'), s)
            S = s.shape_operator.value
            cofactor = np.linalg.det(S)[..., None, None] * np.linalg.inv(S) @ s.g_inv.value
            self.assertSmall(fields.T.value, cofactor, 1e-9)
            self.assertSmall(fields.F.value - cofactor, cofactor, 1e-9)

    def test_symmetric_stress_without_gradient_coupling(self):
        for s in self.shapes:
            for atom in ('tr_h4', 'h_4', 'H_tr_h3', 'h0_4', 'grad_H_sq'):
                fields = muller_fields(get_lagrangian(atom), s)
                self.assertSmall(fields.T_antisymmetric, fields.T.value, 1e-9, atom)

    def test_antisymmetric_stress_of_grad_h(self):
        for s in self.shapes:
            fields = muller_fields(get_lagrangian('grad_h_sq'), s)
            g_inv = s.g_inv.value
            product = g_inv @ s.lap_h.value @ s.shape_operator.value @ g_inv
            expected = -3.0 * (product - np.swapaxes(product, -1, -2))
            self.assertSmall(fields.T_antisymmetric - expected, fields.T.value, 1e-9)

    def test_trace_formulas(self):
        for L in (e_alpha_beta(-6.0, 60.0), e_family(1.0, 2.0, 3.0, 0.5, -0.25)):
            for s in self.shapes:
                for check in trace_checks(L, s):
                    self.assertLess(check.residual, 1e-7, f'{L.name} {check.name}')

    def test_order_requirements(self):
        s = geometry(Sphere(), random_chart_points(Sphere().chart, 2, np.random.default_rng(0)), 3)
        with self.assertRaises(InsufficientOrder):
            muller_fields(get_lagrangian('H4'), s)
        fields = muller_fields(get_lagrangian('H4'), self.shapes[0])
        self.assertIsNone(fields.V)
        self.assertIsNone(fields.divergence)
        with self.assertRaises(ConfigError):
            noether_table('det_h', self.shapes[0])


class BumpTests(SimpleTestCase):

    def test_profile_support(self):
        x = Jet.variable(0, np.array([-1.5, -0.5, 0.0, 0.5, 1.5]), 3)
        profile = bump_profile(x)
        np.testing.assert_allclose(profile.value, [0.0, 0.75 ** 8, 1.0, 0.75 ** 8, 0.0])
        np.testing.assert_allclose(profile.coeffs[[0, 4]], 0.0)

    def test_bump_must_fit_the_chart(self):
        chart = TorusOfRevolution().chart
        Bump.centered(chart).check(chart)
        with self.assertRaises(BumpSupportError):
            Bump.centered(Sphere().chart, fraction=0.6).check(Sphere().chart)
