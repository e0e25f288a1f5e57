from pathlib import Path

import numpy as np
from django.core.management.base import CommandError

from lyapcert.management.base import EXIT_CERTIFIED, EXIT_INPUT, LyapcertCommand, parse_vector
from lyapcert.report import render, simulate
from lyapcert.simulate import RK4, RKF45, IntegratorConfig, ball_initial_conditions


class Command(LyapcertCommand):
    help = (
        'Integrate trajectories from given (--x0) or seeded random (--random) '
        'initial conditions. Prints a JSON summary; with --csv writes one CSV '
        'per trajectory (t, x1..xn, V) and summary.json into that directory.'
    )

    def add_command_arguments(self, parser):
        parser.add_argument('--x0', action='append', default=[], help='Initial condition "a,b,...". Repeatable.')
        parser.add_argument('--random', type=int, help='Number of random initial conditions in the ball.')
        parser.add_argument('--radius', type=float, help='Ball radius for --random (default SIMULATION_RADIUS).')
        parser.add_argument('--tend', type=float, help='Final time (default T_END).')
        parser.add_argument('--integrator', choices=[RK4, RKF45], default=RK4)
        parser.add_argument('--csv', help='Directory for trajectory CSV files and summary.json.')

    def initial_conditions(self, loaded, config, options):
        n = loaded.system.n
        rows = [parse_vector(text, n, '--x0') for text in options['x0']]
        if options['random'] is not None:
            if options['random'] < 1:
                raise CommandError('--random must be at least 1.', returncode=EXIT_INPUT)
            radius = config.simulation_radius if options['radius'] is None else options['radius']
            if not radius >= 0:
                raise CommandError('--radius must be non-negative.', returncode=EXIT_INPUT)
            rows.extend(ball_initial_conditions(n, radius, options['random'], config.seed).tolist())
        if not rows:
            raise CommandError('Give --x0 and/or --random.', returncode=EXIT_INPUT)
        return np.array(rows, dtype=float)

    def run(self, loaded, config, options):
        x0s = self.initial_conditions(loaded, config, options)
        t_end = config.t_end if options['tend'] is None else options['tend']
        if not t_end > 0:
            raise CommandError('--tend must be positive.', returncode=EXIT_INPUT)
        csv_dir = None
        if options['csv']:
            csv_dir = Path(options['csv'])
            csv_dir.mkdir(parents=True, exist_ok=True)
        integrator = IntegratorConfig.from_config(config, options['integrator'])
        report, summary = simulate(loaded, config, x0s, t_end, integrator, csv_dir)
        self.emit(render(report), options)
        if summary.monotonicity_violations:
            self.stderr.write(f'{summary.monotonicity_violations} V-monotonicity violation(s) recorded.')
        return EXIT_CERTIFIED
