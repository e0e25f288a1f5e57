"""
Built-in systems, stored in system-file form so they go through the same
validation as user files.

example-2.1   x1' = -2 x1 + x2^2,  x2' = x1^2 - 2 x2 on the ball of radius 4;
              beta_i < 0 inside |x1| + |x2| < 4, whose inscribed ball has
              radius sqrt(8). (2, 2) is a second equilibrium on that circle.
example-2.2   x1' = -4 x1 + x1 sech(x1) + 4 x2,  x2' = -x1 - 6 x2 - x2 cos(x2),
              unbounded; globally asymptotically stable.
hopfield-2    two tanh(3x) units with a = (10, 10) and linear coupling
              L = [[-3, 1], [1, -1]], W = diag(-1, 1/5).
"""

import copy

BUILTINS = {
    'example-2.1': {
        'kind': 'expressions',
        'n': 2,
        'components': ['-2*x1 + x2^2', 'x1^2 - 2*x2'],
        'ball_radius': 4.0,
    },
    'example-2.2': {
        'kind': 'expressions',
        'n': 2,
        'components': ['-4*x1 + x1*sech(x1) + 4*x2', '-x1 - 6*x2 - x2*cos(x2)'],
        'ball_radius': 'unbounded',
    },
    'hopfield-2': {
        'kind': 'hopfield',
        'n': 2,
        'a': [10.0, 10.0],
        'L': [[-3.0, 1.0], [1.0, -1.0]],
        'W': [[-1.0, 0.0], [0.0, 0.2]],
        'theta': [0.0, 0.0],
        'activations': [
            {'kind': 'tanh', 'gain': 3.0},
            {'kind': 'tanh', 'gain': 3.0},
        ],
        'x_star': [0.0, 0.0],
    },
}

BUILTIN_NAMES = tuple(BUILTINS)


def builtin_definition(name):
    """A fresh copy of the named built-in's system-file body."""
    try:
        definition = BUILTINS[name]
    except KeyError:
        raise KeyError(f'Unknown builtin {name!r}; expected one of {", ".join(BUILTIN_NAMES)}.') from None
    return copy.deepcopy(definition)
