"""
Command-line front end.

``manage.py <command> [options]`` runs one of the verification commands
through Django's ``call_command``; anything else is handed to Django.
Exit codes: 0 when every row passes, 2 when a report carries a
DISCREPANCY row (the report is written first), 1 on usage or
configuration errors.
"""
import logging
import sys

from django.core.management import call_command, execute_from_command_line
from django.core.management.base import BaseCommand, CommandError

from .config import ALLOWED_KEYS, COMMANDS, load_run_config
from .exceptions import ConfigError, PersistError
from .reporting import PASS
from .services import VerificationService

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_USAGE = 1
EXIT_DISCREPANCY = 2


def usage():
    lines = ["usage: manage.py <command> [--config FILE] [options]", "", "commands and config-file keys:"]
    for command in COMMANDS:
        lines.append(f"  {command:<15} {', '.join(sorted(ALLOWED_KEYS[command]))}")
    lines += ["", "surfaces: sphere:rho  ellipsoid:a1,..,a5  torus:R,r  graph[:amplitude]  default",
              "          optional suffixes @inv:c1,..,c5 @dil:s @tr:v1,..,v5, list separator ';'",
              "flags override config-file values; settings supply the remaining defaults", ""]
    return '\n'.join(lines)


def command_module(command):
    return command.replace('-', '_')


def parse_and_dispatch(argv, config_file=None):
    """Run ``argv`` (without the program name) and return the exit code."""
    if not argv:
        sys.stderr.write(usage())
        return EXIT_USAGE
    command, *rest = argv
    if command in ('-h', '--help', 'help') and not rest:
        sys.stdout.write(usage())
        return EXIT_PASS
    if command not in COMMANDS:
        execute_from_command_line(['manage.py', *argv])
        return EXIT_PASS

    if config_file:
        rest = ['--config', config_file, *rest]
    try:
        call_command(command_module(command), *rest)
    except CommandError as e:
        sys.stderr.write(f"{e}\n")
        if e.returncode == EXIT_USAGE:
            sys.stderr.write(usage())
        return e.returncode
    return EXIT_PASS


class VerificationCommand(BaseCommand):
    """Shared flags, config loading, persistence and exit-code mapping."""

    command_name = None

    def add_arguments(self, parser):
        parser.add_argument('--config', type=str, help='JSON config file; flags override its values')
        parser.add_argument('--seed', type=int, help='Seed for random points and frames')
        parser.add_argument('--grid', type=int, help='Quadrature nodes per chart axis')
        parser.add_argument('--chunk-size', type=int, help='Grid points per vectorised batch')
        parser.add_argument('--tolerance', type=float, help='Override every tolerance except printed-coefficient rows')
        parser.add_argument('--out', type=str, help='Also write the JSON report here')
        parser.add_argument('--csv', type=str, help='Also write the CSV residual table here')
        parser.add_argument('--runs-dir', type=str, help='Directory for persisted reports')
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    @staticmethod
    def add_surface_argument(parser):
        parser.add_argument('--surfaces', '--surface', dest='surfaces', type=str,
                            help="Surfaces separated by ';', e.g. 'sphere:1;torus:2,1', or 'default'")

    def load_config(self, options):
        try:
            return load_run_config(self.command_name, options, options.get('config'))
        except ConfigError as e:
            raise CommandError(str(e), returncode=EXIT_USAGE)

    def run(self, service):
        raise NotImplementedError

    def handle(self, *args, **options):
        config = self.load_config(options)
        service = VerificationService(config)
        report = self.run(service)
        try:
            path = service.save(report)
        except PersistError as e:
            raise CommandError(str(e), returncode=EXIT_USAGE)
        self.write_rows(report, options.get('verbosity', 1))
        self.stdout.write(f'Report: {path}')
        if report.failed:
            raise CommandError(
                f'{report.failed} of {len(report.rows)} rows are DISCREPANCY (report at {path})',
                returncode=EXIT_DISCREPANCY,
            )
        self.stdout.write(self.style.SUCCESS(f'All {len(report.rows)} rows PASS'))

    def write_rows(self, report, verbosity):
        for row in report.rows:
            if row.verdict == PASS and verbosity < 2:
                continue
            line = f'{row.verdict:<11} {row.id:<48} {row.residual:.3e} (tol {row.tolerance:.0e})'
            if row.recovered:
                line += '  recovered ' + ', '.join(f'{k}={v}' for k, v in row.recovered.items())
            if row.verdict == PASS:
                self.stdout.write(self.style.SUCCESS(line))
            elif row.printed:
                self.stdout.write(self.style.WARNING(line))
            else:
                self.stdout.write(self.style.ERROR(line))
        self.stdout.write(f'{report.passed} passed, {report.failed} failed')
