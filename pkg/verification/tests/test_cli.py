import io
import json
import math
import tempfile
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

from django.core.management import call_command
from django.test import TestCase, override_settings

from verification.cli import EXIT_DISCREPANCY, EXIT_PASS, EXIT_USAGE, parse_and_dispatch
from verification.config import load_run_config
from verification.models import RunRecord
from verification.reporting import PASS
from verification.services import VerificationService, list_runs


class RunsDirMixin:

    def setUp(self):
        super().setUp()
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.runs = Path(self.tmp.name) / 'runs'
        override = override_settings(VERIFY_RUNS_DIR=self.runs)
        override.enable()
        self.addCleanup(override.disable)


class ServiceTests(RunsDirMixin, TestCase):

    def test_energy_run_is_saved_once(self):
        config = load_run_config('energy', {'preset': 'EC', 'surfaces': 'sphere:1', 'grid': 16})
        service = VerificationService(config)
        report = service.energy()
        row = report['energy:EC:sphere(1)']
        self.assertEqual(row.verdict, PASS)
        self.assertAlmostEqual(row.value / (96.0 * math.pi ** 2), 1.0, places=8)

        path = service.save(report)
        self.assertTrue(path.exists())
        self.assertEqual(path.parent, self.runs)
        self.assertEqual(service.save(report), path)
        record = RunRecord.objects.get(config_hash=service.digest)
        self.assertEqual(record.verdict, 'PASS')
        self.assertEqual(record.passed, 1)
        self.assertEqual(RunRecord.objects.count(), 1)

        runs = list_runs(self.runs)
        self.assertEqual(len(runs), 1)
        self.assertEqual(runs[0]['command'], 'energy')
        self.assertEqual(runs[0]['verdict'], 'PASS')

    def test_record_is_keyed_by_configuration(self):
        config = load_run_config('energy', {'preset': 'EC', 'surfaces': 'sphere:1', 'grid': 8})
        service = VerificationService(config)
        report = service.energy()
        _, created = RunRecord.record(config, service.digest, report, 'a.json')
        self.assertTrue(created)
        record, created = RunRecord.record(config, service.digest, report, 'b.json')
        self.assertFalse(created)
        self.assertEqual(record.report_path, 'a.json')

    def test_open_patch_becomes_a_failed_row(self):
        config = load_run_config('energy', {'preset': 'EC', 'surfaces': 'graph', 'grid': 8})
        report = VerificationService(config).energy()
        row = report['energy:EC:graph(0.3)']
        self.assertEqual(row.verdict, 'DISCREPANCY')
        self.assertIn('OpenPatchError', row.note)


class DispatchTests(RunsDirMixin, TestCase):

    def dispatch(self, argv, config_file=None):
        out, err = io.StringIO(), io.StringIO()
        with redirect_stdout(out), redirect_stderr(err):
            code = parse_and_dispatch(argv, config_file)
        return code, out.getvalue(), err.getvalue()

    def test_usage(self):
        code, _, err = self.dispatch([])
        self.assertEqual(code, EXIT_USAGE)
        self.assertIn('usage: manage.py', err)
        code, out, _ = self.dispatch(['help'])
        self.assertEqual(code, EXIT_PASS)
        self.assertIn('exterior-suite', out)

    def test_configuration_errors(self):
        code, _, err = self.dispatch(['energy', '--surfaces', 'sphere:1'])
        self.assertEqual(code, EXIT_USAGE)
        self.assertIn('preset', err)
        config = Path(self.tmp.name) / 'bad.json'
        config.write_text(json.dumps({'colour': 'red'}), encoding='utf-8')
        code, _, err = self.dispatch(['energy', '--preset', 'EC'], str(config))
        self.assertEqual(code, EXIT_USAGE)
        self.assertIn('colour', err)

    def test_exit_codes(self):
        argv = ['energy', '--preset', 'EC', '--surfaces', 'sphere:1', '--grid', '16']
        code, out, _ = self.dispatch(argv)
        self.assertEqual(code, EXIT_PASS)
        self.assertIn('All 1 rows PASS', out)
        code, _, err = self.dispatch(['energy', '--preset', 'EC', '--surfaces', 'sphere:1', '--grid', '8',
                                      '--tolerance', '1e-12'])
        self.assertEqual(code, EXIT_DISCREPANCY)
        self.assertIn('DISCREPANCY', err)
        self.assertEqual(len(list(self.runs.glob('energy-*.json'))), 2)

    def test_report_copies(self):
        out_path = Path(self.tmp.name) / 'copies' / 'energy.json'
        csv_path = Path(self.tmp.name) / 'energy.csv'
        code, _, _ = self.dispatch(['energy', '--preset', 'EC', '--surfaces', 'sphere:1', '--grid', '16',
                                    '--out', str(out_path), '--csv', str(csv_path)])
        self.assertEqual(code, EXIT_PASS)
        self.assertEqual(json.loads(out_path.read_text())['summary']['verdict'], PASS)
        self.assertTrue(csv_path.read_text().startswith('id,surface,grid,residual,order,verdict'))


class CommandTests(RunsDirMixin, TestCase):

    def test_invariants(self):
        out = io.StringIO()
        call_command('invariants', surfaces='sphere:1', random_points=3, stdout=out)
        self.assertIn('sphere(1) (3 points)', out.getvalue())
        self.assertIn('det_h', out.getvalue())

    def test_report_lists_runs(self):
        out = io.StringIO()
        call_command('report', stdout=out)
        self.assertIn('No stored runs', out.getvalue())

        call_command('energy', preset='EC', surfaces='sphere:1', grid=16, stdout=io.StringIO())
        out = io.StringIO()
        call_command('report', stdout=out)
        self.assertIn('Found 1 stored runs', out.getvalue())
        self.assertIn('energy', out.getvalue())
