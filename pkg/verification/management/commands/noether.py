from verification.cli import VerificationCommand


class Command(VerificationCommand):
    help = 'Check stress tensors, trace formulas and, optionally, the first variation for one Lagrangian'
    command_name = 'noether'

    def add_command_arguments(self, parser):
        self.add_surface_argument(parser)
        parser.add_argument(
            '--lagrangian',
            type=str,
            help='An atom such as H4, or E_alpha_beta:a,b, E_family:a,b,c,m,l, generic:a1..a7',
        )
        parser.add_argument('--random-points', type=int, help='Random points per surface')
        parser.add_argument('--variation', action='store_true', default=None, help='Run the first-variation check')
        parser.add_argument('--variation-grid', type=int, help='Grid for the first-variation quadrature')

    def run(self, service):
        return service.noether()
