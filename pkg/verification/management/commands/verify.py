from verification.cli import VerificationCommand


class Command(VerificationCommand):
    help = 'Run the verification suite (pointwise, integral, noether and exterior identities)'
    command_name = 'verify'

    def add_command_arguments(self, parser):
        self.add_surface_argument(parser)
        parser.add_argument('--random-points', type=int, help='Random points per surface for pointwise identities')
        parser.add_argument('--exterior-samples', type=int, help='Random frames for the exterior identities')
        parser.add_argument(
            '--sections',
            type=str,
            help='Comma-separated subset of pointwise,integral,noether,exterior',
        )
        parser.add_argument(
            '--variation',
            action='store_true',
            default=None,
            help='Also run the finite-difference first-variation checks (slow)',
        )
        parser.add_argument('--variation-grid', type=int, help='Grid for the first-variation quadrature')
        parser.add_argument(
            '--acceptance',
            action='store_true',
            default=None,
            help='Integrate on VERIFY_ACCEPTANCE_GRID unless --grid is given',
        )

    def run(self, service):
        return service.verify()
