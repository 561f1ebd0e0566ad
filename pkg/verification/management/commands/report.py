from django.core.management.base import BaseCommand, CommandError
from django.db import DatabaseError

from verification.cli import EXIT_USAGE
from verification.config import load_run_config
from verification.exceptions import ConfigError
from verification.models import RunRecord
from verification.services import list_runs


class Command(BaseCommand):
    help = 'List stored runs with their verdict summaries'

    def add_arguments(self, parser):
        parser.add_argument('--config', type=str, help='JSON config file')
        parser.add_argument('--runs-dir', type=str, help='Directory holding persisted reports')

    def handle(self, *args, **options):
        try:
            config = load_run_config('report', options, options.get('config'))
        except ConfigError as e:
            raise CommandError(str(e), returncode=EXIT_USAGE)

        runs = list_runs(config.runs_path)
        if not runs:
            self.stdout.write(self.style.WARNING(f'No stored runs in {config.runs_path}'))
            return

        try:
            recorded = set(RunRecord.objects.values_list('config_hash', flat=True))
        except DatabaseError as e:
            self.stdout.write(self.style.WARNING(f'Run database unavailable: {e}'))
            recorded = None
        self.stdout.write(f'Found {len(runs)} stored runs in {config.runs_path}')
        for run in runs:
            mark = '' if recorded is None or run['config_hash'] in recorded else ' (not in database)'
            line = (f"{run['verdict']:<11} {run['command']:<15} {run['config_hash'][:16]} "
                    f"{run['passed']}/{run['rows']} passed{mark}")
            style = self.style.SUCCESS if run['verdict'] == 'PASS' else self.style.WARNING
            self.stdout.write(style(line))
