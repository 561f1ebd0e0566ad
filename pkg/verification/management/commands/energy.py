from verification.cli import VerificationCommand


class Command(VerificationCommand):
    help = 'Integrate an energy preset over closed surfaces with a two-grid error estimate'
    command_name = 'energy'

    def add_command_arguments(self, parser):
        self.add_surface_argument(parser)
        parser.add_argument(
            '--preset',
            type=str,
            help='EA, EA_reconciled, EB, EB_printed, EB_reconciled, EC, W2, Q, EWm, E3:mu,lambda,sigma or generic:a1..a7',
        )
        parser.add_argument(
            '--acceptance',
            action='store_true',
            default=None,
            help='Integrate on VERIFY_ACCEPTANCE_GRID unless --grid is given',
        )

    def run(self, service):
        report = service.energy()
        for row in report.rows:
            if row.value is not None:
                self.stdout.write(f'{row.surfaces[0]}: {row.value:.12g} ({row.note})')
        return report
