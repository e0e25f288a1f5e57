from django.core.management.base import CommandError

from lyapcert.management.base import EXIT_CERTIFIED, EXIT_INCONCLUSIVE, EXIT_INPUT, LyapcertCommand
from lyapcert.report import region, render


class Command(LyapcertCommand):
    help = (
        'Largest ball radius (up to --rmax) on which every beta_i is negative. '
        'The radius is printed on stdout; --out also writes the JSON report.'
    )

    def add_command_arguments(self, parser):
        parser.add_argument('--rmax', type=float, required=True, help='Largest radius to consider.')
        parser.add_argument('--tol', type=float, help='Radius resolution (default REGION_TOL).')

    def run(self, loaded, config, options):
        if not options['rmax'] > 0:
            raise CommandError('--rmax must be positive.', returncode=EXIT_INPUT)
        if options['tol'] is not None and not options['tol'] > 0:
            raise CommandError('--tol must be positive.', returncode=EXIT_INPUT)
        report, search = region(loaded, config, options['rmax'], options['tol'])
        self.stdout.write(f'{search.radius:.10g}')
        if options.get('out'):
            self.emit(render(report), options)
        return EXIT_CERTIFIED if search.radius > 0 else EXIT_INCONCLUSIVE
