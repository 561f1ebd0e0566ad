from verification.cli import VerificationCommand


class Command(VerificationCommand):
    help = 'Check the multivector-valued form identities on random frames'
    command_name = 'exterior-suite'

    def add_command_arguments(self, parser):
        parser.add_argument('--exterior-samples', type=int, help='Number of random frames')

    def run(self, service):
        return service.exterior_suite()
