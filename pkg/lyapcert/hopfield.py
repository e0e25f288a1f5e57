"""
Continuous-time Hopfield-Tank networks

    x_i' = -a_i x_i + sum_j L_ij x_j + sum_j W_ij nu_j(x_j) + I_i

compiled into SystemDefs whose equilibrium sits at the origin. nu_j folds the
bias in, nu_j(x) = mu_j(x + theta_j); L is an optional direct linear coupling.
Only the autonomous case (I = 0) compiles.
"""
import logging

import attrs
import numpy as np

from .conf import default_config
from .criteria import PAPER, BetaProfile, betas_from_entries, quadrature_options
from .exceptions import EquilibriumError, SystemDefinitionError, UnsupportedFeatureError
from .expr import eval_dual, evaluate, parse
from .ray_integral import ray_matrix
from .system_model import DUAL, UNBOUNDED, SystemDef, make_system, translate_equilibrium

logger = logging.getLogger(__name__)

TANH = 'tanh'
LINEAR = 'linear'
EXPRESSION = 'expression'

# below |g x| = 1e-4 the ratio tanh(g x)/x is taken from its Taylor series
_TAU_SERIES_LIMIT = 1e-4


# --- Activations ---

@attrs.frozen
class ActivationSpec:
    """
    One unit's response mu(x): tanh(gain * x), slope * x, or an expression
    over x1. Exposes value, derivative and the ratio tau(x) = mu(x) / x.
    """
    kind: str = attrs.field(validator=attrs.validators.in_((TANH, LINEAR, EXPRESSION)))
    gain: float = 1.0
    expression: object = None

    def __attrs_post_init__(self):
        if self.kind == TANH and not self.gain > 0:
            raise SystemDefinitionError(f'tanh gain must be positive, got {self.gain}.')
        if self.kind == EXPRESSION and self.expression is None:
            raise SystemDefinitionError('Expression activations need an expression over x1.')

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == TANH:
            return np.tanh(self.gain * x)
        if self.kind == LINEAR:
            return self.gain * x
        return evaluate(self.expression, x[..., None])

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == TANH:
            return self.gain / np.cosh(self.gain * x) ** 2
        if self.kind == LINEAR:
            return self.gain + 0.0 * x
        return eval_dual(self.expression, x[..., None], 1).derivative

    def tau(self, x):
        """mu(x) / x, with the removable singularity at 0 filled in."""
        x = np.asarray(x, dtype=float)
        if self.kind == LINEAR:
            return self.gain + 0.0 * x
        if self.kind == TANH:
            g = self.gain
            near = np.abs(g * x) < _TAU_SERIES_LIMIT
            safe = np.where(near, 1.0, x)
            series = g - g ** 3 * x ** 2 / 3 + 2 * g ** 5 * x ** 4 / 15
            return np.where(near, series, np.tanh(g * safe) / safe)
        at_zero = x == 0
        safe = np.where(at_zero, 1.0, x)
        return np.where(at_zero, self.derivative(np.zeros_like(x)), self.value(safe) / safe)

    def describe(self):
        if self.kind == EXPRESSION:
            return {'kind': EXPRESSION, 'expression': self.expression.source}
        key = 'gain' if self.kind == TANH else 'slope'
        return {'kind': self.kind, key: float(self.gain)}


def tanh_activation(gain=1.0):
    return ActivationSpec(TANH, float(gain))


def linear_activation(slope=1.0):
    return ActivationSpec(LINEAR, float(slope))


def expression_activation(source):
    return ActivationSpec(EXPRESSION, 1.0, parse(source, 1))


# --- Networks ---

def _vector(value):
    return np.asarray(value, dtype=float)


def _optional_vector(value):
    return None if value is None else _vector(value)


@attrs.frozen(eq=False)
class HopfieldNetwork:
    a: np.ndarray = attrs.field(converter=_vector)
    W: np.ndarray = attrs.field(converter=_vector)
    activations: tuple = attrs.field(converter=tuple)
    theta: np.ndarray | None = attrs.field(default=None, converter=_optional_vector)
    L: np.ndarray | None = attrs.field(default=None, converter=_optional_vector)
    inputs: np.ndarray | None = attrs.field(default=None, converter=_optional_vector)
    x_star: np.ndarray | None = attrs.field(default=None, converter=_optional_vector)
    label: str = ''

    def __attrs_post_init__(self):
        n = len(self.a)
        if self.a.shape != (n,) or n < 1:
            raise SystemDefinitionError('a must be a non-empty vector.')
        if not np.all(self.a > 0):
            raise SystemDefinitionError(f'Decay rates must be positive, got {self.a.tolist()}.')
        if self.W.shape != (n, n):
            raise SystemDefinitionError(f'W must be {n}x{n}, got shape {self.W.shape}.')
        if len(self.activations) != n:
            raise SystemDefinitionError(f'Expected {n} activations, got {len(self.activations)}.')
        for name in ('theta', 'inputs', 'x_star'):
            value = getattr(self, name)
            if value is not None and value.shape != (n,):
                raise SystemDefinitionError(f'{name} must have length {n}.')
        if self.L is not None and self.L.shape != (n, n):
            raise SystemDefinitionError(f'L must be {n}x{n}, got shape {self.L.shape}.')
        for name in ('a', 'W', 'theta', 'L', 'inputs', 'x_star'):
            value = getattr(self, name)
            if value is not None and not np.all(np.isfinite(value)):
                raise SystemDefinitionError(f'{name} must be finite.')

    @property
    def n(self):
        return len(self.a)

    @property
    def bias(self):
        return np.zeros(self.n) if self.theta is None else self.theta

    @property
    def coupling(self):
        return np.zeros((self.n, self.n)) if self.L is None else self.L

    @property
    def autonomous(self):
        return self.inputs is None or not np.any(self.inputs)

    def responses(self, points):
        """nu_j(x_j) = mu_j(x_j + theta_j) along the last axis."""
        shifted = np.asarray(points, dtype=float) + self.bias
        return np.stack(
            [spec.value(shifted[..., j]) for j, spec in enumerate(self.activations)], axis=-1)

    def response_slopes(self, points):
        shifted = np.asarray(points, dtype=float) + self.bias
        return np.stack(
            [spec.derivative(shifted[..., j]) for j, spec in enumerate(self.activations)], axis=-1)

    def rhs(self, points):
        points = np.asarray(points, dtype=float)
        return -self.a * points + points @ self.coupling.T + self.responses(points) @ self.W.T

    def rhs_jacobian(self, points):
        points = np.asarray(points, dtype=float)
        linear = self.coupling - np.diag(self.a)
        return linear + self.W * self.response_slopes(points)[..., None, :]

    def describe(self):
        return {
            'kind': 'hopfield',
            'a': self.a.tolist(),
            'W': self.W.tolist(),
            'L': self.coupling.tolist(),
            'theta': self.bias.tolist(),
            'activations': [spec.describe() for spec in self.activations],
        }


@attrs.frozen(eq=False)
class HopfieldField:
    """The network's right-hand side as a vector field for SystemDef."""
    network: HopfieldNetwork

    @property
    def n(self):
        return self.network.n

    def evaluate(self, points):
        return self.network.rhs(points)

    def jacobian(self, points):
        return self.network.rhs_jacobian(points)

    def describe(self):
        return self.network.describe()


# --- Equilibria ---

def find_equilibrium(net, guess=None, config=None):
    """
    Damped Newton on -a x + L x + W nu(x) = 0 with the analytic Jacobian;
    the step is halved until the residual norm decreases.
    """
    config = config or default_config()
    x = np.zeros(net.n) if guess is None else np.array(guess, dtype=float)
    if x.shape != (net.n,) or not np.all(np.isfinite(x)):
        raise EquilibriumError(f'Guess must be a finite vector of length {net.n}.', iterate=x)

    residual = net.rhs(x)
    size = np.linalg.norm(residual)
    for iteration in range(config.newton_max_iter):
        if size <= config.newton_tol:
            logger.debug('Newton converged after %d iterations: |F| = %.3e', iteration, size)
            return x
        jacobian = net.rhs_jacobian(x)
        try:
            step = np.linalg.solve(jacobian, -residual)
        except np.linalg.LinAlgError:
            raise EquilibriumError(f'Singular Jacobian at iterate {x.tolist()}.', iterate=x) from None
        damping = 1.0
        while True:
            candidate = x + damping * step
            candidate_residual = net.rhs(candidate)
            candidate_size = np.linalg.norm(candidate_residual)
            if candidate_size < size:
                break
            damping /= 2
            if damping < 2.0 ** -40:
                raise EquilibriumError(
                    f'Line search stalled at iterate {x.tolist()} (|F| = {size:.3e}).', iterate=x)
        x, residual, size = candidate, candidate_residual, candidate_size
    if size <= config.newton_tol:
        return x
    raise EquilibriumError(
        f'Newton did not converge in {config.newton_max_iter} iterations (|F| = {size:.3e}).', iterate=x)


def compile_network(net, config=None):
    """
    The network as a SystemDef with its equilibrium moved to the origin.
    Uses net.x_star when given, otherwise searches from 0.
    """
    config = config or default_config()
    if not net.autonomous:
        raise UnsupportedFeatureError(
            'Time-varying external inputs I(t) are not supported; only I = 0 networks compile.')
    x_star = net.x_star if net.x_star is not None else find_equilibrium(net, config=config)
    system = SystemDef(net.n, HopfieldField(net), DUAL, UNBOUNDED, net.label or 'hopfield')
    if np.any(x_star):
        return translate_equilibrium(system, x_star, tol=config.equilibrium_tol)
    return make_system(system.field, UNBOUNDED, DUAL, system.label, zero_tol=config.zero_tol)


# --- network form of beta ---

@attrs.frozen(eq=False)
class HopfieldBetaProfile(BetaProfile):
    """Beta values with the decay -a_i and the f_ii(x) parts shown separately."""
    decay: np.ndarray = None
    f_diagonal: np.ndarray = None


def theorem5_betas(net, point, system=None, config=None):
    """
    beta_i(x) = -a_i + f_ii(x) + 1/2 sum_{j != i} (|f_ij(x)| + |f_ji(x)|),
    where the compiled ray matrix is D(x) = -diag(a) + F(x).
    """
    config = config or default_config()
    system = system or compile_network(net, config)
    point = np.asarray(point, dtype=float)
    ray = ray_matrix(system, point, **quadrature_options(config))
    f_matrix = ray.entries + np.diag(net.a)
    return HopfieldBetaProfile(
        point=point,
        values=betas_from_entries(ray.entries, PAPER),
        variant=PAPER,
        est_error=ray.est_error,
        decay=-net.a,
        f_diagonal=np.diagonal(f_matrix).copy(),
    )
