import json
import math
import tempfile
from pathlib import Path

from django.test import SimpleTestCase

from verification.exceptions import PersistError
from verification.reporting import (
    DISCREPANCY,
    PASS,
    VerificationReport,
    convergence_order,
    decide,
    failed_row,
    load_report,
    make_row,
    persist,
    validate_report,
)


def sample_report():
    report = VerificationReport({'command': 'verify', 'config_hash': 'ab' * 32, 'tool_version': '0.1.0',
                                 'seed': 1, 'grid': 8})
    report.add(make_row('pointwise:weyl_norm', "|W|^2", 1e-12, 1e-9, ['sphere(1)']))
    report.add(make_row('pointwise:ricci_weyl', "|Ric|^2", 0.3, 1e-9, ['sphere(1)'], printed=True,
                        recovered={'det_h': '-12'}))
    report.add(make_row('integral:closed_form_EC', "E_C", 2e-7, 1e-6, ['sphere(1)'], grid=16, coarse=3e-5))
    return report


class DecisionTests(SimpleTestCase):

    def test_decide(self):
        self.assertEqual(decide(1e-10, 1e-9), PASS)
        self.assertEqual(decide(1e-8, 1e-9), DISCREPANCY)
        self.assertEqual(decide(math.nan, 1.0), DISCREPANCY)
        self.assertEqual(decide(math.inf, 1.0), DISCREPANCY)
        # the coarse grid misses the tolerance, so the fine grid must show convergence
        self.assertEqual(decide(1e-7, 1e-6, coarse=1e-5, order=6.6), PASS)
        self.assertEqual(decide(1e-7, 1e-6, coarse=1e-5, order=1.0), DISCREPANCY)
        self.assertEqual(decide(1e-7, 1e-6, coarse=1e-5), DISCREPANCY)

    def test_convergence_order(self):
        self.assertAlmostEqual(convergence_order(1.6e-3, 1e-4), 4.0)
        self.assertEqual(convergence_order(1e-3, 0.0), math.inf)
        self.assertIsNone(convergence_order(0.0, 1e-3))
        self.assertIsNone(convergence_order(math.nan, 1e-3))

    def test_rows(self):
        report = sample_report()
        self.assertEqual(report.passed, 2)
        self.assertAlmostEqual(report['integral:closed_form_EC'].order, math.log2(150.0))
        self.assertEqual(report.verdict, DISCREPANCY)
        with self.assertRaises(ValueError):
            report.add(make_row('pointwise:weyl_norm', '', 0.0, 1.0))
        failed = failed_row('exterior:d_eta', 'd eta', ZeroDivisionError('boom'))
        self.assertTrue(math.isnan(failed.residual))
        self.assertEqual(failed.note, 'ZeroDivisionError: boom')

    def test_tolerance_override_keeps_printed_rows(self):
        report = sample_report().with_tolerance(1.0)
        self.assertEqual(report.meta['tolerance_override'], 1.0)
        self.assertEqual(report['pointwise:weyl_norm'].tolerance, 1.0)
        self.assertEqual(report['pointwise:ricci_weyl'].verdict, DISCREPANCY)
        self.assertEqual(report['pointwise:ricci_weyl'].tolerance, 1e-9)
        strict = sample_report().with_tolerance(1e-15)
        self.assertEqual(strict['pointwise:weyl_norm'].verdict, DISCREPANCY)


class SerializationTests(SimpleTestCase):

    def test_non_finite_values(self):
        report = sample_report()
        report.add(failed_row('exterior:d_eta', 'd eta', RuntimeError('x')))
        report.add(make_row('exterior:d_squared', 'dd', math.inf, 1.0))
        data = json.loads(report.to_json())
        rows = {row['id']: row for row in data['rows']}
        self.assertIsNone(rows['exterior:d_eta']['residual'])
        self.assertEqual(rows['exterior:d_squared']['residual'], 'inf')
        self.assertEqual(data['summary'], {'rows': 5, 'passed': 2, 'failed': 3, 'verdict': DISCREPANCY})
        self.assertIn('exterior:d_eta,,,nan,,DISCREPANCY', report.to_csv())

    def test_schema(self):
        data = sample_report().to_dict()
        self.assertEqual(validate_report(data), [])
        data['rows'][0]['verdict'] = 'MAYBE'
        data['rows'][1]['extra'] = 1
        problems = validate_report(data)
        self.assertEqual(len(problems), 2)
        self.assertTrue(problems[0].startswith('rows/0/verdict'))
        self.assertIn('extra', problems[1])

    def test_schema_enforces_types(self):
        data = json.loads(sample_report().to_json())
        self.assertEqual(validate_report(data), [])
        data['meta']['seed'] = 'abc'
        data['rows'][0]['tolerance'] = 'x'
        data['summary']['passed'] = 2.5
        problems = validate_report(data)
        self.assertEqual(len(problems), 3)
        self.assertTrue(any(p.startswith('meta/seed') for p in problems))
        self.assertTrue(any(p.startswith('rows/0/tolerance') for p in problems))
        self.assertTrue(any(p.startswith('summary/passed') for p in problems))

    def test_undocumented_meta_keys_are_rejected(self):
        data = sample_report().to_dict()
        data['meta']['colour'] = 'red'
        data['debug'] = True
        problems = validate_report(data)
        self.assertEqual(len(problems), 2)
        self.assertTrue(any(p.startswith('meta:') and 'colour' in p for p in problems))

    def test_persist_is_content_addressed(self):
        report = sample_report()
        with tempfile.TemporaryDirectory() as tmp:
            first = persist(report, Path(tmp) / 'runs', 'verify', 'ab' * 32)
            second = persist(report, Path(tmp) / 'runs', 'verify', 'ab' * 32)
            self.assertEqual(first, second)
            self.assertEqual(first.name, f"verify-{'ab' * 8}.json")
            self.assertTrue(first.with_suffix('.csv').exists())
            self.assertEqual(load_report(first), report.to_dict())
            self.assertEqual(len(list((Path(tmp) / 'runs').iterdir())), 2)

    def test_unreadable_report(self):
        with tempfile.TemporaryDirectory() as tmp:
            broken = Path(tmp) / 'broken.json'
            broken.write_text('{', encoding='utf-8')
            with self.assertRaises(PersistError):
                load_report(broken)
            with self.assertRaises(PersistError):
                load_report(Path(tmp) / 'missing.json')
