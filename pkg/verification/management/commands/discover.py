from verification.cli import VerificationCommand


class Command(VerificationCommand):
    help = 'Recover linear relations between basis integrals over a family of closed surfaces'
    command_name = 'discover'

    def add_command_arguments(self, parser):
        parser.add_argument(
            '--family',
            type=str,
            help="Surfaces separated by ';', or 'default' for the seeded 30-surface family",
        )
        parser.add_argument('--held-out', type=str, help="Surfaces used to re-verify recovered identities")

    def run(self, service):
        self.stdout.write(f'Integrating {len(service.config.family_specs)} surfaces at n={service.config.grid}')
        return service.discover()
