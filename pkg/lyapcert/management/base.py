import json
import logging
import math
import sys
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError
from rest_framework import serializers

from ..conf import resolve_config
from ..exceptions import ConfigurationError, ExpressionError, LyapcertError, SystemDefinitionError
from ..serializers import json_pointer_errors, load_system, parse_system_text

EXIT_CERTIFIED = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_INCONCLUSIVE = 3

BUILTIN_PREFIX = 'builtin:'


class LyapcertCommand(BaseCommand):
    """
    Shared surface of the lyapcert commands: the system-file argument, the
    common flags and the exit-code contract (0 certified, 3 inconclusive,
    2 input error, 1 internal error).

    Subclasses implement add_command_arguments() and run(), which returns
    the exit code.
    """
    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument(
            'file',
            help='System file (JSON), "-" for stdin, or builtin:<name>.')
        parser.add_argument('--seed', type=int, help='Seed for sampling and random starts (env LYAPCERT_SEED).')
        parser.add_argument('--out', help='Write the JSON report to this path instead of stdout.')
        parser.add_argument('--quad-tol', type=float, dest='quad_tol', help='Ray-integral quadrature tolerance.')
        parser.add_argument('--margin', type=float, help='Safety margin for strict negativity.')
        parser.add_argument('--horizon', type=float, help='Outer radius of the unbounded-ball shells.')
        parser.add_argument('--samples', type=int, help='Halton points per shell.')
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def handle(self, *args, **options):
        self.configure_logging(options['verbosity'])
        try:
            loaded = load_system(self.read_document(options['file']))
            config = resolve_config(loaded.overrides, self.flag_overrides(options))
            code = self.run(loaded, config, options)
        except serializers.ValidationError as exc:
            self.stderr.write(json.dumps({'errors': json_pointer_errors(exc.detail)}, sort_keys=True, indent=2))
            raise CommandError('Invalid system file.', returncode=EXIT_INPUT)
        except (ConfigurationError, ExpressionError, SystemDefinitionError) as exc:
            raise CommandError(str(exc), returncode=EXIT_INPUT)
        except LyapcertError as exc:
            raise CommandError(f'{type(exc).__name__}: {exc}', returncode=EXIT_INTERNAL)
        if code == EXIT_INCONCLUSIVE:
            raise CommandError('No stability certificate on the sampled region.', returncode=EXIT_INCONCLUSIVE)
        if code:
            raise CommandError('Command failed.', returncode=code)

    def run(self, loaded, config, options):
        raise NotImplementedError('subclasses of LyapcertCommand must provide a run() method')

    # --- Helpers ---

    def configure_logging(self, verbosity):
        logger = logging.getLogger('lyapcert')
        if verbosity == 0:
            logger.setLevel(logging.WARNING)
        elif verbosity >= 2:
            logger.setLevel(logging.DEBUG)

    def read_document(self, source):
        if source.startswith(BUILTIN_PREFIX):
            return {'kind': 'builtin', 'name': source[len(BUILTIN_PREFIX):]}
        if source == '-':
            return parse_system_text(sys.stdin.read())
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise CommandError(f'Cannot read {source}: {exc.strerror}', returncode=EXIT_INPUT)
        return parse_system_text(text)

    def flag_overrides(self, options):
        """Command-line values for AnalysisConfig; unset flags are None and ignored."""
        for name in ('quad_tol', 'horizon'):
            if options.get(name) is not None and not options[name] > 0:
                raise CommandError(f'--{name.replace("_", "-")} must be positive.', returncode=EXIT_INPUT)
        if options.get('margin') is not None and not options['margin'] >= 0:
            raise CommandError('--margin must be non-negative.', returncode=EXIT_INPUT)
        for name in ('seed', 'samples'):
            if options.get(name) is not None and options[name] < 0:
                raise CommandError(f'--{name} must be non-negative.', returncode=EXIT_INPUT)
        return {
            'seed': options.get('seed'),
            'quad_tol': options.get('quad_tol'),
            'margin': options.get('margin'),
            'horizon': options.get('horizon'),
            'halton_points': options.get('samples'),
            'halton_per_shell': options.get('samples'),
        }

    def emit(self, text, options):
        """The report goes to --out when given, stdout otherwise."""
        if options.get('out'):
            Path(options['out']).write_text(text)
        else:
            self.stdout.write(text, ending='')


def parse_vector(text, n, flag):
    try:
        values = [float(part) for part in text.split(',')]
    except ValueError:
        raise CommandError(f'{flag} expects comma-separated numbers, got {text!r}.', returncode=EXIT_INPUT)
    if not all(math.isfinite(value) for value in values):
        raise CommandError(f'{flag} coordinates must be finite.', returncode=EXIT_INPUT)
    if len(values) != n:
        raise CommandError(f'{flag} needs {n} coordinates, got {len(values)}.', returncode=EXIT_INPUT)
    return values
