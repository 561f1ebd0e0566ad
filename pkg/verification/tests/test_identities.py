import math
from fractions import Fraction

import numpy as np
from django.test import SimpleTestCase

from verification.catalog import Sphere, TorusOfRevolution
from verification.config import RunConfig
from verification.energies import GAUSS_BONNET_FACTOR, IntegralResult, e_mu_lambda_sigma, integrate
from verification.exceptions import IllConditionedFamily
from verification.identities import (
    BASIS_FIELDS,
    EB_EXPECTED,
    EB_FITTED,
    EB_FIXED,
    GAUSS_BONNET_GENERAL_TOLERANCE,
    GAUSS_BONNET_TOLERANCE,
    GENERIC_ELLIPSOID,
    PRINTED_COROLLARY,
    SUITE_ROWS,
    TARGETS,
    BasisIntegralVector,
    analyse_family,
    check_family,
    coverage_problems,
    default_family,
    eb_reconciliation,
    exterior_section,
    extract_identity,
    gauss_bonnet_outcome,
    integral_nullspace,
    pointwise_section,
    run_suite,
)
from verification.reporting import DISCREPANCY, PASS, VerificationReport, make_row

PI2 = math.pi ** 2
FREE = ('grad_H_sq', 'tr_h4', 'h_4', 'H_tr_h3', 'H2_h2', 'H4', 'h0_4', 'tr_h04')


def synthetic_vector(rng, chi, weyl_from_eb=False, hidden=False):
    """Basis integrals satisfying exactly the Gauss-Bonnet, corollary and Weyl relations."""
    v = {name: float(rng.uniform(1.0, 5.0)) for name in FREE}
    if hidden:
        v['tr_h4'] = 2.0 * v['H4'] + v['H2_h2'] / 3.0
    v['det_h'] = 8.0 * PI2 * chi / 6.0
    v['grad_h_sq'] = 16.0 * v['grad_H_sq'] - 4.0 * v['H_tr_h3'] + v['h_4']
    if weyl_from_eb:
        fixed = sum(float(c) * v[k] for k, c in EB_FIXED.items())
        v['W2'] = 2.0 * (fixed + sum(float(c) * v[k] for k, c in zip(EB_FITTED, EB_EXPECTED)))
    else:
        v['W2'] = 7.0 / 3.0 * v['h0_4'] - 4.0 * v['tr_h04']
    values = np.array([v[name] for name in BASIS_FIELDS])
    return BasisIntegralVector(f'synthetic{chi}', values, np.full(len(values), 1e-14), chi)


def synthetic_family(seed, count=30, **kwargs):
    rng = np.random.default_rng(seed)
    return [synthetic_vector(rng, (0, 2)[k % 2], **kwargs) for k in range(count)]


class RegistryTests(SimpleTestCase):

    def test_printed_rows_are_flagged(self):
        self.assertTrue(SUITE_ROWS['pointwise:ricci_weyl'].printed)
        self.assertFalse(SUITE_ROWS['pointwise:ricci_weyl:reconciled'].printed)
        self.assertTrue(SUITE_ROWS['noether:variation:E_C'].optional)

    def test_coverage(self):
        report = VerificationReport({})
        self.assertIn('missing row exterior:d_eta', coverage_problems(report, SUITE_ROWS, ('exterior',)))
        report.extend(exterior_section(8, np.random.default_rng(0)))
        self.assertEqual(coverage_problems(report, SUITE_ROWS, ('exterior',)), [])
        report.add(make_row('exterior:unknown', '', 0.0, 1.0))
        self.assertEqual(coverage_problems(report, SUITE_ROWS, ('exterior',)), ['unregistered row exterior:unknown'])


class NullspaceTests(SimpleTestCase):

    def test_nullity_ignores_column_scales(self):
        rng = np.random.default_rng(1)
        base = rng.standard_normal((20, 5))
        matrix = np.column_stack([base, base[:, 0] + 2.0 * base[:, 1]])
        for scale in (1.0, 1e6):
            scaled = matrix.copy()
            scaled[:, 2] *= scale
            nullspace = integral_nullspace(scaled)
            self.assertEqual(nullspace.nullity, 1)
            self.assertLess(nullspace.gap, 1e-8)
            v = nullspace.basis[:, 0] / nullspace.basis[0, 0]
            np.testing.assert_allclose(v, [1.0, 2.0, 0.0, 0.0, 0.0, -1.0], atol=1e-9)

    def test_duplicate_rows_do_not_change_the_nullspace(self):
        matrix = np.stack([v.row() for v in synthetic_family(2)])
        once = integral_nullspace(matrix)
        twice = integral_nullspace(np.vstack([matrix, matrix]))
        self.assertEqual(once.nullity, twice.nullity)
        self.assertEqual(once.nullity, 3)

    def test_extract_identity(self):
        nullspace = integral_nullspace(np.stack([v.row() for v in synthetic_family(3)]))
        coefficients, rational, ratio = extract_identity(nullspace, ('det_h', 'chi'), 'det_h', Fraction(6))
        self.assertEqual(rational, [Fraction(6), Fraction(-8)])
        self.assertLess(ratio, 1e-12)


class DiscoveryTests(SimpleTestCase):

    def test_targets_are_recovered(self):
        result = analyse_family(synthetic_family(4), held_out=synthetic_family(5, count=2))
        self.assertEqual(result.nullspace.nullity, 3)
        for target in TARGETS:
            found = result.identities[target.name]
            self.assertEqual(found.rational, target.expected, target.name)
            self.assertEqual(found.mismatch(), 0.0)
            self.assertLess(found.membership, 1e-8)
            self.assertLess(found.held_out_residual, 1e-12)
        corollary = result.identities['corollary']
        self.assertEqual(corollary.mismatch(PRINTED_COROLLARY, 2), 0.0)
        self.assertEqual(corollary.mismatch(PRINTED_COROLLARY), 5.0)
        self.assertEqual(corollary.as_dict()['H_tr_h3'], Fraction(4))

    def test_rational_basis_spans_the_nullspace(self):
        result = analyse_family(synthetic_family(4), held_out=synthetic_family(5, count=2))
        self.assertEqual(len(result.basis), result.nullspace.nullity)
        self.assertIn({'det_h': Fraction(1), 'chi': Fraction(-4, 3)}, result.basis)
        self.assertIn({'grad_h_sq': Fraction(1), 'grad_H_sq': Fraction(-16), 'h_4': Fraction(-1),
                       'H_tr_h3': Fraction(4)}, result.basis)
        self.assertIn({'h0_4': Fraction(1), 'tr_h04': Fraction(-12, 7), 'W2': Fraction(-3, 7)}, result.basis)

    def test_untargeted_relations_are_reported(self):
        family = synthetic_family(11, hidden=True)
        held_out = synthetic_family(12, count=2, hidden=True)
        result = analyse_family(family, held_out=held_out)
        self.assertEqual(result.nullspace.nullity, 4)
        self.assertEqual(len(result.basis), 4)
        self.assertIn({'tr_h4': Fraction(1), 'H2_h2': Fraction(-1, 3), 'H4': Fraction(-2)}, result.basis)
        for relation in result.basis:
            self.assertTrue(all(q.denominator <= 64 for q in relation.values()))
            for vector in held_out:
                self.assertLess(vector.relative_residual(relation), 1e-12)

    def test_eb_fit(self):
        fit = eb_reconciliation(synthetic_family(6, weyl_from_eb=True),
                                held_out=synthetic_family(7, count=2, weyl_from_eb=True))
        self.assertEqual(fit.rational, EB_EXPECTED)
        self.assertEqual(fit.rank, len(EB_FITTED))
        self.assertLess(fit.residual, 1e-12)
        self.assertLess(fit.held_out_residual, 1e-12)
        self.assertEqual(fit.weights()['grad_H_sq'], Fraction(-16, 3))

    def test_family_requirements(self):
        with self.assertRaises(IllConditionedFamily):
            check_family([Sphere()] * 5)
        with self.assertRaises(IllConditionedFamily):
            check_family([Sphere(0.5 + 0.1 * k) for k in range(30)])
        family = default_family(20240601)
        self.assertEqual(len(family), 30)
        check_family(family)
        self.assertEqual([s.label for s in default_family(20240601)], [s.label for s in family])


class GaussBonnetRowTests(SimpleTestCase):

    def row(self, results, tolerance):
        return make_row('integral:gauss_bonnet', '', **gauss_bonnet_outcome(results, tolerance))

    def test_strict_tolerance(self):
        self.assertEqual(GAUSS_BONNET_TOLERANCE, 1e-6)
        sphere = 2.0 * GAUSS_BONNET_FACTOR
        good = [(Sphere(1.0), IntegralResult(sphere * (1.0 + 5e-7), 0.0, 48, sphere)),
                (TorusOfRevolution(2.0, 1.0), IntegralResult(5e-7, 0.0, 48, 0.0))]
        self.assertEqual(self.row(good, GAUSS_BONNET_TOLERANCE).verdict, PASS)
        # chi = 0 is judged in absolute terms
        torus = [(TorusOfRevolution(2.0, 1.0), IntegralResult(2e-6, 0.0, 48, 0.0))]
        row = self.row(torus, GAUSS_BONNET_TOLERANCE)
        self.assertEqual(row.verdict, DISCREPANCY)
        self.assertAlmostEqual(row.residual, 2e-6)
        drifted = [(Sphere(1.0), IntegralResult(sphere * (1.0 + 1e-5), 0.0, 48, sphere))]
        self.assertEqual(self.row(drifted, GAUSS_BONNET_TOLERANCE).verdict, DISCREPANCY)

    def test_general_surfaces_use_the_looser_tolerance(self):
        expected = GAUSS_BONNET_FACTOR * GENERIC_ELLIPSOID.euler_char
        results = [(GENERIC_ELLIPSOID, IntegralResult(expected * (1.0 + 5e-5), 0.0, 48, expected))]
        self.assertEqual(self.row(results, GAUSS_BONNET_GENERAL_TOLERANCE).verdict, PASS)
        self.assertEqual(self.row(results, GAUSS_BONNET_TOLERANCE).verdict, DISCREPANCY)
        self.assertTrue(SUITE_ROWS['integral:gauss_bonnet_general'].optional)

    def test_quadrature_meets_the_strict_tolerance(self):
        preset = e_mu_lambda_sigma(0.0, 0.0, 6.0)
        results = [(spec, integrate(spec, preset, n=12)) for spec in (Sphere(1.0), TorusOfRevolution(2.0, 1.0))]
        row = self.row(results, GAUSS_BONNET_TOLERANCE)
        self.assertEqual(row.verdict, PASS, row.note)
        self.assertEqual(row.grid, 12)


class SectionTests(SimpleTestCase):

    def test_pointwise_section(self):
        report = VerificationReport({})
        report.extend(pointwise_section([GENERIC_ELLIPSOID], 6, np.random.default_rng(8)))
        for row in report.rows:
            if not row.printed:
                self.assertEqual(row.verdict, PASS, f'{row.id}: {row.residual:.3e} {row.note}')
        printed = report['pointwise:ricci_weyl']
        self.assertEqual(printed.verdict, DISCREPANCY)
        self.assertEqual(printed.recovered['det_h'], '-12')

    def test_exterior_section(self):
        report = VerificationReport({})
        report.extend(exterior_section(16, np.random.default_rng(9)))
        for row in report.rows:
            if not row.printed:
                self.assertEqual(row.verdict, PASS, f'{row.id}: {row.residual:.3e} {row.note}')
        self.assertEqual(report['exterior:contraction_second_derived'].verdict, PASS)
        self.assertEqual(report['exterior:contraction_second_printed'].verdict, DISCREPANCY)
        self.assertEqual(report['exterior:df_normal_printed'].verdict, DISCREPANCY)
        self.assertEqual(report['exterior:lemma_bullet_recovered'].recovered, {'multiplier': '-1'})

    def test_suite_is_deterministic(self):
        config = RunConfig('verify', exterior_samples=8, sections=('exterior',))
        first = run_suite(config, ('exterior',))
        second = run_suite(config, ('exterior',))
        self.assertEqual([r.residual for r in first.rows], [r.residual for r in second.rows])
        self.assertTrue(all(row.id.startswith('exterior:') for row in first.rows))
