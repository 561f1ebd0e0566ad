import csv

from django.core.management.base import BaseCommand, CommandError

from verification.cli import EXIT_USAGE
from verification.config import load_run_config
from verification.exceptions import ConfigError
from verification.services import VerificationService
from verification.shape import InvariantVector


class Command(BaseCommand):
    help = 'Evaluate the pointwise curvature invariants at random chart points'

    def add_arguments(self, parser):
        parser.add_argument('--config', type=str, help='JSON config file; flags override its values')
        parser.add_argument('--surfaces', '--surface', dest='surfaces', type=str,
                            help="Surfaces separated by ';', or 'default'")
        parser.add_argument('--random-points', type=int, help='Points per surface')
        parser.add_argument('--seed', type=int, help='Seed for the random points')
        parser.add_argument('--csv', type=str, help='Write every point and invariant to this CSV file')

    def handle(self, *args, **options):
        try:
            config = load_run_config('invariants', options, options.get('config'))
        except ConfigError as e:
            raise CommandError(str(e), returncode=EXIT_USAGE)

        names = InvariantVector.names()
        samples = VerificationService(config).invariants()
        for spec, points, inv in samples:
            self.stdout.write(self.style.SUCCESS(f'{spec.label} ({len(points)} points)'))
            for name in names:
                values = inv[name]
                self.stdout.write(f'  {name:<10} min {values.min(): .6e}  max {values.max(): .6e}')

        if config.csv:
            try:
                with open(config.csv, 'w', newline='', encoding='utf-8') as handle:
                    writer = csv.writer(handle)
                    writer.writerow(('surface', 'u1', 'u2', 'u3', 'u4') + names)
                    for spec, points, inv in samples:
                        table = inv.as_array()
                        for point, row in zip(points, table):
                            writer.writerow([spec.label, *(f'{x:.17g}' for x in point), *(f'{x:.17g}' for x in row)])
            except OSError as e:
                raise CommandError(f'Cannot write {config.csv}: {e}', returncode=EXIT_USAGE)
            self.stdout.write(f'Wrote {config.csv}')
