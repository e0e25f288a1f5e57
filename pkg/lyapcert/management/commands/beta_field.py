import numpy as np
from django.core.management.base import CommandError

from lyapcert.criteria import PAPER, VARIANTS, beta_field
from lyapcert.management.base import EXIT_CERTIFIED, EXIT_INPUT, LyapcertCommand, parse_vector
from lyapcert.report import grid_points, write_beta_csv
from lyapcert.sampling import system_plan


class Command(LyapcertCommand):
    help = (
        'Export beta_i over a grid (--grid, 2-D systems only), explicit points '
        '(--point) or the sampling plan as CSV: x1..xn, beta1..betan. '
        'Invoked as beta_field; there is no beta-field spelling.'
    )

    def add_command_arguments(self, parser):
        parser.add_argument('--grid', type=int, help='Points per axis over [-extent, extent]^2.')
        parser.add_argument('--extent', type=float, default=4.0, help='Half-width of the grid (default 4).')
        parser.add_argument('--point', action='append', default=[], help='Extra point "a,b,...". Repeatable.')
        parser.add_argument('--variant', choices=VARIANTS, default=PAPER)
        parser.add_argument('--csv', help='Output CSV path (default stdout).')

    def points(self, loaded, config, options):
        n = loaded.system.n
        parts = []
        if options['grid'] is not None:
            if n != 2:
                raise CommandError(f'--grid needs a 2-D system, this one has n = {n}.', returncode=EXIT_INPUT)
            if options['grid'] < 1 or not options['extent'] > 0:
                raise CommandError('--grid and --extent must be positive.', returncode=EXIT_INPUT)
            parts.append(grid_points(options['extent'], options['grid']))
        if options['point']:
            parts.append(np.array([parse_vector(text, n, '--point') for text in options['point']]))
        if not parts:
            parts.append(system_plan(loaded.system, config).points)
        return np.concatenate(parts)

    def run(self, loaded, config, options):
        field = beta_field(loaded.system, self.points(loaded, config, options), options['variant'], config)
        if options['csv']:
            with open(options['csv'], 'w', newline='') as stream:
                write_beta_csv(stream, field)
        else:
            write_beta_csv(self.stdout, field)
        return EXIT_CERTIFIED
