"""
Autonomous systems x'(t) = g(x) with their Jacobians.

A SystemDef couples a vector field with the analysis ball D = {||x|| <= M}
(or "unbounded", which asks for the global check) and with the way Jacobians
are obtained: exact dual-number derivatives or central finite differences.
Construction refuses systems whose zero solution is not an equilibrium.
"""
import logging
import math

import attrs
import numpy as np

from .conf import lyapcert_settings
from .exceptions import (
    DimensionError, NonFiniteValueError, NotAnEquilibriumError,
    SystemDefinitionError, ZeroSolutionError,
)
from .expr import eval_dual, evaluate, parse

logger = logging.getLogger(__name__)

UNBOUNDED = math.inf


@attrs.frozen
class JacobianMode:
    kind: str = attrs.field(validator=attrs.validators.in_(('dual', 'finite_difference')))
    step: float | None = None

    def __str__(self):
        if self.kind == 'dual':
            return 'dual'
        return f'finite_difference(h={self.step})'


DUAL = JacobianMode('dual')


def finite_difference(step=None):
    return JacobianMode('finite_difference', step)


# --- Vector fields ---

@attrs.frozen
class ExpressionField:
    """g_i given as parsed expressions over x1..xn."""
    components: tuple

    @property
    def n(self):
        return len(self.components)

    def evaluate(self, points):
        points = np.asarray(points, dtype=float)
        return np.stack([evaluate(component, points) for component in self.components], axis=-1)

    def jacobian(self, points):
        points = np.asarray(points, dtype=float)
        rows = []
        for component in self.components:
            rows.append(np.stack(
                [eval_dual(component, points, j + 1).derivative for j in range(self.n)], axis=-1))
        return np.stack(rows, axis=-2)

    def describe(self):
        return {'kind': 'expressions', 'components': [c.source for c in self.components]}


@attrs.frozen(eq=False)
class ShiftedField:
    """
    g(y + x*) - g(x*). The residual g(x*) (at most the equilibrium tolerance)
    is removed so that the shifted origin is an exact zero solution.
    """
    base: object
    shift: np.ndarray
    residual: np.ndarray

    @property
    def n(self):
        return self.base.n

    def evaluate(self, points):
        return self.base.evaluate(np.asarray(points, dtype=float) + self.shift) - self.residual

    def jacobian(self, points):
        return self.base.jacobian(np.asarray(points, dtype=float) + self.shift)

    def describe(self):
        description = dict(self.base.describe())
        description['shift'] = [float(value) for value in self.shift]
        return description


# --- Systems ---

@attrs.frozen(eq=False)
class JacobianMatrix:
    point: np.ndarray
    entries: np.ndarray


@attrs.frozen(eq=False)
class SystemDef:
    n: int
    field: object
    jacobian_mode: JacobianMode = DUAL
    ball_radius: float = UNBOUNDED
    label: str = ''

    @property
    def unbounded(self):
        return math.isinf(self.ball_radius)

    def evaluate(self, points):
        points = _checked_points(self, points)
        with np.errstate(all='ignore'):
            values = self.field.evaluate(points)
        if not np.all(np.isfinite(values)):
            raise NonFiniteValueError(f'g is not finite for system {self.label!r}.', value=values)
        return values

    def jacobian_stack(self, points):
        """Jacobians at one point (n, n) or at a stack of points (m, n, n)."""
        points = _checked_points(self, points)
        with np.errstate(all='ignore'):
            if self.jacobian_mode.kind == 'dual':
                entries = self.field.jacobian(points)
            else:
                entries = _central_differences(self, points)
        if not np.all(np.isfinite(entries)):
            raise NonFiniteValueError(f'Jacobian is not finite for system {self.label!r}.', value=entries)
        return entries

    def describe(self):
        description = dict(self.field.describe())
        description.update({
            'n': self.n,
            'label': self.label,
            'ball_radius': 'unbounded' if self.unbounded else float(self.ball_radius),
            'jacobian_mode': str(self.jacobian_mode),
        })
        return description


def _checked_points(system, points):
    points = np.asarray(points, dtype=float)
    if points.ndim not in (1, 2) or points.shape[-1] != system.n:
        raise DimensionError(f'Expected points of dimension {system.n}, got shape {points.shape}.')
    if not np.all(np.isfinite(points)):
        raise DimensionError('Points must have finite coordinates.')
    return points


def _central_differences(system, points):
    step = system.jacobian_mode.step or lyapcert_settings.FD_STEP
    # h scales with ||x|| for uniform relative accuracy across the ball
    h = step * np.maximum(1.0, np.linalg.norm(points, axis=-1))
    columns = []
    for j in range(system.n):
        offset = np.zeros_like(points)
        offset[..., j] = h
        forward = system.field.evaluate(points + offset)
        backward = system.field.evaluate(points - offset)
        columns.append((forward - backward) / (2.0 * np.asarray(h)[..., None]))
    return np.stack(columns, axis=-1)


def _validated(system, zero_tol=None):
    zero_tol = lyapcert_settings.ZERO_TOL if zero_tol is None else zero_tol
    origin = np.zeros(system.n)
    residual = np.linalg.norm(system.evaluate(origin))
    if residual > zero_tol:
        raise ZeroSolutionError(
            f'g(0) = {system.evaluate(origin).tolist()} is not zero (|g(0)| = {residual:.3e}).')
    system.jacobian_stack(origin)
    return system


def _ball_radius(ball_radius):
    if ball_radius is None or ball_radius == 'unbounded':
        return UNBOUNDED
    ball_radius = float(ball_radius)
    if not ball_radius > 0:
        raise SystemDefinitionError('ball_radius must be positive or "unbounded".')
    return ball_radius


def make_system(field, ball_radius=UNBOUNDED, jacobian_mode=DUAL, label='', zero_tol=None):
    """Wrap an already-built vector field and validate its zero solution."""
    system = SystemDef(field.n, field, jacobian_mode, _ball_radius(ball_radius), label)
    return _validated(system, zero_tol)


def build_system(n, component_sources, ball_radius=UNBOUNDED, jacobian_mode=DUAL, label='',
                 equilibrium=None):
    """
    Parse `component_sources` over x1..xn into a validated SystemDef.

    When `equilibrium` is given the system is first translated so that this
    point becomes the origin; otherwise g(0) must vanish.
    """
    if n < 1:
        raise SystemDefinitionError('n must be at least 1.')
    if len(component_sources) != n:
        raise SystemDefinitionError(f'Expected {n} components, got {len(component_sources)}.')
    field = ExpressionField(tuple(parse(source, n) for source in component_sources))
    system = SystemDef(n, field, jacobian_mode, _ball_radius(ball_radius), label)
    if equilibrium is not None:
        return translate_equilibrium(system, equilibrium)
    logger.debug('Built system %r with n=%d', label, n)
    return _validated(system)


def jacobian(system, point):
    """J_ij(x) = dg_i/dx_j at a single point."""
    point = np.asarray(point, dtype=float)
    return JacobianMatrix(point, system.jacobian_stack(point))


def translate_equilibrium(system, x_star, tol=None):
    """
    Move the equilibrium x* to the origin: g^(y) = g(y + x*).
    """
    tol = lyapcert_settings.EQUILIBRIUM_TOL if tol is None else tol
    x_star = np.asarray(x_star, dtype=float)
    residual = system.evaluate(x_star)
    if np.linalg.norm(residual) > tol:
        raise NotAnEquilibriumError(
            f'|g(x*)| = {np.linalg.norm(residual):.3e} exceeds {tol:.1e} at x* = {x_star.tolist()}.')
    if not np.any(x_star):
        return _validated(system)
    shifted = SystemDef(
        system.n,
        ShiftedField(system.field, x_star, residual),
        system.jacobian_mode,
        system.ball_radius,
        f'{system.label} [shifted by x* = {np.round(x_star, 12).tolist()}]',
    )
    logger.info('Translated equilibrium %s of %r to the origin', x_star.tolist(), system.label)
    return _validated(shifted)
