"""
Report rows, verdicts and the JSON / CSV artifacts written for every run.
"""
import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

from jsonschema import Draft202012Validator

from .exceptions import PersistError

logger = logging.getLogger(__name__)

PASS = 'PASS'
DISCREPANCY = 'DISCREPANCY'
MIN_CONVERGENCE_ORDER = 1.5
SCHEMA_PATH = Path(__file__).with_name('report_schema.json')
CSV_COLUMNS = ('id', 'surface', 'grid', 'residual', 'order', 'verdict')


def _finite(x):
    return x is not None and math.isfinite(x)


def convergence_order(coarse, fine):
    """Observed order from residuals on an n/2 and an n grid."""
    if not (_finite(coarse) and _finite(fine)) or coarse <= 0.0:
        return None
    if fine <= 0.0:
        return math.inf
    return math.log2(coarse / fine)


def decide(residual, tolerance, coarse=None, order=None):
    if not _finite(residual) or residual > tolerance:
        return DISCREPANCY
    if coarse is not None and _finite(coarse) and coarse > tolerance:
        if order is None or order < MIN_CONVERGENCE_ORDER:
            return DISCREPANCY
    return PASS


@dataclass
class ReportRow:
    id: str
    location: str
    residual: float
    tolerance: float
    verdict: str
    surfaces: list = field(default_factory=list)
    grid: Optional[int] = None
    coarse_residual: Optional[float] = None
    order: Optional[float] = None
    printed: bool = False
    recovered: Optional[dict] = None
    note: str = ''
    value: Optional[float] = None

    @property
    def passed(self):
        return self.verdict == PASS

    def redecide(self, tolerance):
        """Same row judged against ``tolerance``; rows checking printed coefficients keep their verdict."""
        if self.printed:
            return self
        verdict = decide(self.residual, tolerance, self.coarse_residual, self.order)
        return replace(self, tolerance=tolerance, verdict=verdict)

    def to_dict(self):
        data = asdict(self)
        for key in ('residual', 'tolerance', 'coarse_residual', 'order', 'value'):
            value = data[key]
            if value is not None and not math.isfinite(value):
                data[key] = None if math.isnan(value) else ('inf' if value > 0 else '-inf')
        return data


def make_row(id, location, residual, tolerance, surfaces=(), grid=None, coarse=None,
             printed=False, recovered=None, note='', value=None):
    residual = float(residual)
    coarse = None if coarse is None else float(coarse)
    order = convergence_order(coarse, residual) if coarse is not None else None
    verdict = decide(residual, tolerance, coarse, order)
    if verdict != PASS:
        logger.debug(f"{id}: residual {residual:.3e} > tolerance {tolerance:.1e}")
    return ReportRow(
        id=id, location=location, residual=residual, tolerance=float(tolerance), verdict=verdict,
        surfaces=[str(s) for s in surfaces], grid=grid, coarse_residual=coarse, order=order,
        printed=printed, recovered=recovered, note=note, value=None if value is None else float(value),
    )


def failed_row(id, location, error, surfaces=(), printed=False):
    """A check that raised; the suite carries on."""
    logger.error(f"{id} ({location}) raised {type(error).__name__}: {error}")
    return ReportRow(
        id=id, location=location, residual=math.nan, tolerance=0.0, verdict=DISCREPANCY,
        surfaces=[str(s) for s in surfaces], printed=printed, note=f"{type(error).__name__}: {error}",
    )


@dataclass
class VerificationReport:
    meta: dict
    rows: list = field(default_factory=list)

    def add(self, row):
        if any(existing.id == row.id for existing in self.rows):
            raise ValueError(f"Duplicate report row {row.id!r}")
        self.rows.append(row)
        return row

    def extend(self, rows):
        for row in rows:
            self.add(row)

    def __getitem__(self, row_id):
        for row in self.rows:
            if row.id == row_id:
                return row
        raise KeyError(row_id)

    @property
    def ids(self):
        return [row.id for row in self.rows]

    @property
    def passed(self):
        return sum(1 for row in self.rows if row.passed)

    @property
    def failed(self):
        return len(self.rows) - self.passed

    @property
    def verdict(self):
        return PASS if self.failed == 0 else DISCREPANCY

    def with_tolerance(self, tolerance):
        meta = dict(self.meta, tolerance_override=tolerance)
        return VerificationReport(meta, [row.redecide(tolerance) for row in self.rows])

    def summary(self):
        return {'rows': len(self.rows), 'passed': self.passed, 'failed': self.failed, 'verdict': self.verdict}

    def to_dict(self):
        return {'meta': self.meta, 'summary': self.summary(), 'rows': [row.to_dict() for row in self.rows]}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False)

    def to_csv(self):
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            order = '' if row.order is None else (f"{row.order:.3f}" if math.isfinite(row.order) else 'inf')
            residual = f"{row.residual:.6e}" if math.isfinite(row.residual) else 'nan'
            writer.writerow([row.id, ';'.join(row.surfaces), '' if row.grid is None else row.grid,
                             residual, order, row.verdict])
        return buffer.getvalue()


# schema


def load_schema():
    with open(SCHEMA_PATH, encoding='utf-8') as handle:
        return json.load(handle)


def _where(error):
    path = '/'.join(str(part) for part in error.absolute_path)
    return path or 'report'


def validate_report(data, schema=None):
    """List of problems with a report dictionary; empty when it matches ``report_schema.json``."""
    validator = Draft202012Validator(schema or load_schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    return [f"{_where(error)}: {error.message}" for error in errors]


# persistence


def report_filename(command, digest):
    return f"{command}-{digest[:16]}"


def persist(report, directory, command, digest):
    """Write ``<command>-<hash>.json`` and the sibling CSV; identical runs land on the same path."""
    directory = Path(directory)
    base = report_filename(command, digest)
    json_path = directory / f"{base}.json"
    try:
        directory.mkdir(parents=True, exist_ok=True)
        json_path.write_text(report.to_json() + '\n', encoding='utf-8')
        (directory / f"{base}.csv").write_text(report.to_csv(), encoding='utf-8')
    except OSError as exc:
        raise PersistError(str(json_path), exc.strerror or str(exc)) from exc
    logger.info(f"Persisted {command} report to {json_path}")
    return json_path


def write_report(report, path):
    path = Path(path)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        if path.suffix == '.csv':
            path.write_text(report.to_csv(), encoding='utf-8')
        else:
            path.write_text(report.to_json() + '\n', encoding='utf-8')
    except OSError as exc:
        raise PersistError(str(path), exc.strerror or str(exc)) from exc
    return path


def load_report(path):
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding='utf-8'))
    except (OSError, json.JSONDecodeError) as exc:
        raise PersistError(str(path), str(exc)) from exc
