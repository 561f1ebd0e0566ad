import json
import logging
from pathlib import Path

import numpy as np
from django.db import DatabaseError

from . import __version__
from .catalog import random_chart_points
from .config import config_hash
from .energies import get_preset, integrate
from .exceptions import PersistError
from .identities import (
    FLUX_TOLERANCE,
    INVARIANCE_TOLERANCE,
    TABLE_ATOMS,
    TABLE_TOLERANCE,
    VARIATION_TOLERANCE,
    run_discovery,
    run_suite,
)
from .models import RunRecord
from .noether import get_lagrangian, muller_fields, noether_table, trace_checks, variational_sweep
from .reporting import VerificationReport, failed_row, load_report, make_row, persist, validate_report, write_report
from .shape import geometry, invariants_at

logger = logging.getLogger(__name__)


class VerificationService:
    """Runs one configured command and persists its report."""

    def __init__(self, config):
        self.config = config
        self.digest = config_hash(config)

    def meta(self):
        c = self.config
        meta = {
            'command': c.command,
            'config_hash': self.digest,
            'tool_version': __version__,
            'seed': c.seed,
            'grid': c.grid,
        }
        if c.command in ('energy', 'invariants', 'verify', 'noether'):
            meta['surfaces'] = [spec.label for spec in c.surface_specs]
        if c.command == 'verify':
            meta['sections'] = list(c.sections)
        if c.command == 'energy':
            meta['preset'] = c.preset
        if c.command == 'noether':
            meta['lagrangian'] = c.lagrangian
        if c.command == 'discover':
            meta['family'] = [spec.label for spec in c.family_specs]
            meta['held_out'] = [spec.label for spec in c.held_out_specs]
        return meta

    def _finish(self, report):
        if self.config.tolerance is not None and 'tolerance_override' not in report.meta:
            report = report.with_tolerance(self.config.tolerance)
        return report

    # commands

    def energy(self):
        c = self.config
        preset = get_preset(c.preset)
        tolerance = c.tolerance or INVARIANCE_TOLERANCE
        report = VerificationReport(self.meta())
        for spec in c.surface_specs:
            row_id = f'energy:{preset.name}:{spec.label}'
            location = f"int {preset.name} on {spec.label}"
            try:
                result = integrate(spec, preset, c.grid, c.chunk_size)
                report.add(make_row(row_id, location, result.relative_error, tolerance, [spec.label], c.grid,
                                    note=f"error estimate {result.error:.3e} from the n/2 grid",
                                    value=result.value))
            except Exception as e:
                report.add(failed_row(row_id, location, e, [spec.label]))
        return report

    def invariants(self):
        """Pointwise invariants at random chart points, per surface."""
        c = self.config
        rng = np.random.default_rng(c.seed)
        out = []
        for spec in c.surface_specs:
            points = random_chart_points(spec.chart, c.random_points, rng)
            out.append((spec, points, invariants_at(geometry(spec, points, 4))))
            logger.info(f"Evaluated invariants at {len(points)} points of {spec.label}")
        return out

    def verify(self):
        return run_suite(self.config, self.config.sections, self.meta())

    def exterior_suite(self):
        return run_suite(self.config, ('exterior',), self.meta())

    def discover(self):
        c = self.config
        report = run_discovery(c.family_specs, c.grid, c.held_out_specs, c.chunk_size, self.meta())
        return self._finish(report)

    def noether(self):
        """Trace formulas, stress symmetry and table rows for the configured Lagrangian."""
        c = self.config
        L = get_lagrangian(c.lagrangian)
        rng = np.random.default_rng([c.seed, 2])
        report = VerificationReport(self.meta())
        labels = [spec.label for spec in c.surface_specs]
        try:
            shapes = [geometry(spec, random_chart_points(spec.chart, c.random_points, rng), 4)
                      for spec in c.surface_specs]
        except Exception as e:
            report.add(failed_row(f'noether:{L.name}:sampling', f"order-4 jets for {L.name}", e, labels))
            return self._finish(report)

        checks = {}
        try:
            for s in shapes:
                for check in trace_checks(L, s):
                    previous = checks.get(check.name)
                    worst = max(check.residual, previous[1] if previous else 0.0)
                    checks[check.name] = (check.location, worst)
        except Exception as e:
            report.add(failed_row(f'noether:{L.name}:traces', f"trace formulas for {L.name}", e, labels))
        for name, (location, residual) in checks.items():
            report.add(make_row(f'noether:{L.name}:{name}', location, residual, FLUX_TOLERANCE, labels))

        if not L.weights.get('grad_h_sq'):
            row_id = f'noether:{L.name}:T_symmetric'
            location = f"stress of {L.name} symmetric"
            try:
                worst = 0.0
                for s in shapes:
                    fields = muller_fields(L, s)
                    scale = np.maximum(1.0, np.abs(fields.T.value).max(axis=(-2, -1)))
                    worst = max(worst, float(np.max(np.abs(fields.T_antisymmetric).max(axis=(-2, -1)) / scale)))
                report.add(make_row(row_id, location, worst, TABLE_TOLERANCE, labels))
            except Exception as e:
                report.add(failed_row(row_id, location, e, labels))

        if L.name in TABLE_ATOMS:
            row_id = f'noether:{L.name}:table'
            location = f"stress and F table row for {L.name}"
            try:
                worst = 0.0
                for s in shapes:
                    fields = muller_fields(L, s)
                    T, F = noether_table(L.name, s)
                    for computed, expected in ((fields.T.value, T), (fields.F.value, F)):
                        scale = np.maximum(1.0, np.abs(expected).max(axis=(-2, -1)))
                        worst = max(worst, float(np.max(np.abs(computed - expected).max(axis=(-2, -1)) / scale)))
                report.add(make_row(row_id, location, worst, TABLE_TOLERANCE, labels))
            except Exception as e:
                report.add(failed_row(row_id, location, e, labels))

        if c.variation:
            for spec in (s for s in c.surface_specs if s.closed):
                row_id = f'noether:{L.name}:variation:{spec.label}'
                location = f"first variation of {L.name} against the current"
                try:
                    results = variational_sweep(spec, L, np.eye(5), n=c.variation_grid, chunk_size=c.chunk_size)
                    report.add(make_row(row_id, location, max(r.deviation for r in results), VARIATION_TOLERANCE,
                                        [spec.label], c.variation_grid))
                except Exception as e:
                    report.add(failed_row(row_id, location, e, [spec.label]))
        return self._finish(report)

    # persistence

    def save(self, report):
        """Write the content-addressed report, the requested copies and the database record."""
        problems = validate_report(json.loads(report.to_json()))
        if problems:
            for problem in problems:
                logger.error(f"Report schema: {problem}")
            raise PersistError(str(self.config.runs_path), f"report does not match the schema ({problems[0]})")

        path = persist(report, self.config.runs_path, self.config.command, self.digest)
        for target in (self.config.out, self.config.csv):
            if target:
                write_report(report, target)
                logger.info(f"Wrote {target}")
        try:
            _, created = RunRecord.record(self.config, self.digest, report, path)
            if not created:
                logger.info(f"Run {self.digest[:16]} was already recorded")
        except DatabaseError as e:
            logger.error(f"Could not record run {self.digest[:16]}: {e}")
        return path


def list_runs(directory):
    """Summaries of the reports stored in ``directory``, newest first."""
    directory = Path(directory)
    if not directory.is_dir():
        return []
    runs = []
    for path in sorted(directory.glob('*.json'), key=lambda p: p.stat().st_mtime, reverse=True):
        try:
            data = load_report(path)
        except PersistError as e:
            logger.warning(f"Skipping unreadable report {path}: {e}")
            continue
        meta, summary = data.get('meta', {}), data.get('summary', {})
        runs.append({
            'path': str(path),
            'command': meta.get('command', '?'),
            'config_hash': meta.get('config_hash', ''),
            'seed': meta.get('seed'),
            'rows': summary.get('rows', 0),
            'passed': summary.get('passed', 0),
            'failed': summary.get('failed', 0),
            'verdict': summary.get('verdict', '?'),
        })
    return runs
