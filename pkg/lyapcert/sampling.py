"""
Deterministic sample sets for the sampled stability checks.

A plan always starts with the origin. A bounded ball of radius M is one shell
[0, M]; an unbounded ball is covered by expanding shells [0, 1], [1, 2],
[2, 4], ... up to the horizon. In two dimensions each shell carries a uniform
polar grid (outer ring exactly on the shell boundary) plus scrambled Halton
points; in other dimensions Halton points only, mapped to the annulus with the
first coordinate setting the radius and the rest a Gaussian direction.
"""
import logging
import math

import attrs
import numpy as np
from scipy.stats import norm, qmc

from .conf import default_config
from .exceptions import EmptySamplingPlanError

logger = logging.getLogger(__name__)

_UNIT_CLIP = 1e-12


@attrs.frozen(eq=False)
class SamplingPlan:
    points: np.ndarray
    radius: float
    margin: float
    seed: int = 0
    horizon: float | None = None
    shells: tuple = ()

    @property
    def n(self):
        return self.points.shape[-1]

    @property
    def unbounded(self):
        return self.horizon is not None

    @property
    def norms(self):
        return np.linalg.norm(self.points, axis=-1)

    def __len__(self):
        return len(self.points)

    @classmethod
    def from_points(cls, points, margin, radius=None, horizon=None):
        """A plan over caller-chosen points, in the order given."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if radius is None:
            radius = float(np.max(np.linalg.norm(points, axis=-1))) if len(points) else 0.0
        return cls(points, radius, margin, horizon=horizon)


def shell_bounds(horizon):
    """0, 1, 2, 4, ... doubling until the horizon, which closes the last shell."""
    if horizon <= 1.0:
        return [0.0, float(horizon)]
    bounds = [0.0, 1.0]
    while bounds[-1] * 2 < horizon:
        bounds.append(bounds[-1] * 2)
    bounds.append(float(horizon))
    return bounds


def _halton_annulus(n, inner, outer, count, seed, index):
    sampler = qmc.Halton(d=max(n + 1, 2), scramble=True, seed=np.random.default_rng([seed, index]))
    u = np.clip(sampler.random(count), _UNIT_CLIP, 1.0 - _UNIT_CLIP)
    # uniform in volume: r^n is uniform between inner^n and outer^n
    radii = (inner ** n + u[:, 0] * (outer ** n - inner ** n)) ** (1.0 / n)
    if n == 1:
        directions = np.where(u[:, 1] < 0.5, -1.0, 1.0)[:, None]
    else:
        gaussian = norm.ppf(u[:, 1:])
        directions = gaussian / np.linalg.norm(gaussian, axis=1, keepdims=True)
    return radii[:, None] * directions


def _polar_grid(n, inner, outer, ring_count, direction_count):
    radii = np.linspace(inner, outer, ring_count + 1)[1:]
    if n == 1:
        return (radii[:, None] * np.array([1.0, -1.0])).reshape(-1, 1)
    angles = 2 * np.pi * np.arange(direction_count) / direction_count
    circle = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    return (radii[:, None, None] * circle[None, :, :]).reshape(-1, 2)


def _shell(n, inner, outer, config, index):
    parts = []
    if n <= 2:
        if config.polar_radii > 0 and config.polar_directions > 0:
            parts.append(_polar_grid(n, inner, outer, config.polar_radii, config.polar_directions))
        count = config.halton_points
    else:
        count = config.halton_per_shell
    if count > 0:
        parts.append(_halton_annulus(n, inner, outer, count, config.seed, index))
    return parts


def sampling_plan(n, radius, config=None):
    """
    Build the plan for the ball of `radius` in R^n; math.inf means the
    expanding-shell plan up to config.horizon.
    """
    config = config or default_config()
    horizon = None
    if math.isinf(radius):
        horizon = float(config.horizon)
        bounds = shell_bounds(horizon)
    else:
        bounds = [0.0, float(radius)]
    shells = tuple(zip(bounds[:-1], bounds[1:]))

    parts = [np.zeros((1, n))]
    for index, (inner, outer) in enumerate(shells):
        parts.extend(_shell(n, inner, outer, config, index))
    points = np.concatenate(parts)
    if len(points) == 0:
        raise EmptySamplingPlanError()
    logger.debug('Sampling plan: n=%d, %d points over %d shell(s)', n, len(points), len(shells))
    return SamplingPlan(
        points=points,
        radius=horizon if horizon is not None else float(radius),
        margin=config.margin,
        seed=config.seed,
        horizon=horizon,
        shells=shells,
    )


def system_plan(system, config=None):
    return sampling_plan(system.n, system.ball_radius, config)
