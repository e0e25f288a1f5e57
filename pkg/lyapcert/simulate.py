"""
Trajectories of x' = g(x) for checking verdicts empirically.

Integration is batched: all initial conditions advance together (the adaptive
RKF45 step is shared across the batch). A trajectory whose state leaves the
blow-up ball or turns non-finite is frozen and its record truncated at the
last good state with diverged=True.
"""
import logging
import math

import attrs
import numpy as np

from .conf import default_config
from .exceptions import IntegrationError

logger = logging.getLogger(__name__)

RK4 = 'rk4'
RKF45 = 'rkf45'

# Fehlberg 4(5): stage nodes, stage coefficients, 4th order weights and
# the error weights (5th minus 4th order)
_FEHLBERG_C = (0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2)
_FEHLBERG_A = (
    (),
    (1 / 4,),
    (3 / 32, 9 / 32),
    (1932 / 2197, -7200 / 2197, 7296 / 2197),
    (439 / 216, -8.0, 3680 / 513, -845 / 4104),
    (-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40),
)
_FEHLBERG_B4 = (25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0)
_FEHLBERG_ERROR = (1 / 360, 0.0, -128 / 4275, -2197 / 75240, 1 / 50, 2 / 55)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


@attrs.frozen
class IntegratorConfig:
    method: str = attrs.field(default=RK4, validator=attrs.validators.in_((RK4, RKF45)))
    dt: float = 1e-3
    rtol: float = 1e-9
    atol: float = 1e-9
    blowup_norm: float = 1e6

    @classmethod
    def from_config(cls, config, method=RK4):
        return cls(method, config.dt, config.rtol, config.atol, config.blowup_norm)

    def __str__(self):
        if self.method == RK4:
            return f'rk4(dt={self.dt:g})'
        return f'rkf45(rtol={self.rtol:g}, atol={self.atol:g})'


@attrs.frozen(eq=False)
class TrajectoryRecord:
    times: np.ndarray
    states: np.ndarray
    v_values: np.ndarray
    terminal_norm: float
    integrator: str
    diverged: bool = False

    @property
    def terminal_state(self):
        return self.states[-1]

    def monotonicity_violations(self, tol=1e-9):
        """Steps where V rises by more than tol."""
        return int(np.count_nonzero(np.diff(self.v_values) > tol))


def _rk4_step(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _rkf45_step(f, y, h):
    stages = []
    for coefficients in _FEHLBERG_A:
        increment = sum((a * k for a, k in zip(coefficients, stages)), np.zeros_like(y))
        stages.append(f(y + h * increment))
    y_new = y + h * sum(b * k for b, k in zip(_FEHLBERG_B4, stages))
    error = h * sum(e * k for e, k in zip(_FEHLBERG_ERROR, stages))
    return y_new, error


def _field(system):
    def f(y):
        with np.errstate(all='ignore'):
            return system.field.evaluate(y)
    return f


class _BatchLog:
    """Accepted states of every trajectory; frozen rows stop advancing."""

    def __init__(self, x0s, blowup_norm):
        self.y = x0s.copy()
        self.times = [0.0]
        self.states = [x0s.copy()]
        self.blowup_norm = blowup_norm
        bad = ~np.all(np.isfinite(x0s), axis=-1) | (np.linalg.norm(x0s, axis=-1) > blowup_norm)
        self.alive = ~bad
        self.diverged = bad.copy()
        self.last = np.zeros(len(x0s), dtype=int)

    def accept(self, t, new_rows):
        rows = np.flatnonzero(self.alive)
        with np.errstate(all='ignore'):
            bad = ~np.all(np.isfinite(new_rows), axis=-1) | (
                np.linalg.norm(new_rows, axis=-1) > self.blowup_norm)
        self.y[rows[~bad]] = new_rows[~bad]
        self.alive[rows[bad]] = False
        self.diverged[rows[bad]] = True
        if np.any(bad):
            logger.debug('%d trajectories diverged at t = %.6g', int(np.count_nonzero(bad)), t)
        self.times.append(t)
        self.states.append(self.y.copy())
        self.last[self.alive] = len(self.times) - 1

    def records(self, integrator):
        times = np.asarray(self.times)
        states = np.stack(self.states)
        records = []
        for k in range(states.shape[1]):
            end = self.last[k] + 1
            trajectory = states[:end, k, :].copy()
            v_values = 0.5 * np.sum(trajectory ** 2, axis=-1)
            records.append(TrajectoryRecord(
                times=times[:end].copy(),
                states=trajectory,
                v_values=v_values,
                terminal_norm=float(np.linalg.norm(trajectory[-1])),
                integrator=integrator,
                diverged=bool(self.diverged[k]),
            ))
        return records


def _run_rk4(f, log, t_end, dt):
    steps = max(1, math.ceil(t_end / dt - 1e-9))
    t = 0.0
    for k in range(1, steps + 1):
        if not np.any(log.alive):
            break
        t_next = min(k * dt, t_end)
        log.accept(t_next, _rk4_step(f, log.y[log.alive], t_next - t))
        t = t_next


def _run_rkf45(f, log, t_end, settings):
    t, h = 0.0, min(settings.dt, t_end)
    while t < t_end and np.any(log.alive):
        last_step = h >= t_end - t
        step = t_end - t if last_step else h
        y = log.y[log.alive]
        y_new, error = _rkf45_step(f, y, step)
        with np.errstate(all='ignore'):
            scale = settings.atol + settings.rtol * np.maximum(np.abs(y), np.abs(y_new))
            ratio = np.abs(error) / scale
        finite = np.all(np.isfinite(y_new), axis=-1)
        # rows that blow up are dropped by the log, not by the step controller
        ratio = float(np.max(ratio[finite])) if np.any(finite) else 0.0
        if ratio <= 1.0:
            t = t_end if last_step else t + step
            log.accept(t, y_new)
        factor = _MAX_FACTOR if ratio == 0 else _SAFETY * ratio ** -0.2
        h = step * min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
        if h < 1e-14 * max(1.0, abs(t)):
            raise IntegrationError(f'Step size underflow (h = {h:.3e}) at t = {t:.6g}.')


def integrate_batch(system, x0s, t_end=None, integrator=None, config=None):
    """One TrajectoryRecord per row of x0s, integrated together."""
    config = config or default_config()
    integrator = integrator or IntegratorConfig.from_config(config)
    t_end = config.t_end if t_end is None else t_end
    if not t_end > 0:
        raise IntegrationError('t_end must be positive.')
    x0s = np.atleast_2d(np.asarray(x0s, dtype=float))
    if x0s.shape[-1] != system.n:
        raise IntegrationError(f'Initial conditions must have dimension {system.n}.')
    if not np.all(np.isfinite(x0s)):
        raise IntegrationError('Initial conditions must be finite.')

    f = _field(system)
    log = _BatchLog(x0s, integrator.blowup_norm)
    if integrator.method == RK4:
        _run_rk4(f, log, t_end, integrator.dt)
    else:
        _run_rkf45(f, log, t_end, integrator)
    return log.records(str(integrator))


def integrate(system, x0, t_end=None, integrator=None, config=None):
    x0 = np.asarray(x0, dtype=float)
    return integrate_batch(system, x0[None, :], t_end, integrator, config)[0]


# --- Experiments ---

@attrs.frozen(eq=False)
class ConvergenceSummary:
    count: int
    converged: int
    diverged: int
    max_terminal_norm: float
    monotonicity_violations: int
    radius: float
    t_end: float
    seed: int
    integrator: str
    records: tuple = attrs.field(default=(), repr=False)

    @property
    def fraction_converged(self):
        return self.converged / self.count if self.count else 1.0


def ball_initial_conditions(n, radius, count, seed):
    """Seeded initial conditions uniform in the ball of the given radius."""
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((count, n))
    lengths = np.linalg.norm(directions, axis=-1, keepdims=True)
    directions = np.divide(directions, lengths, out=np.zeros_like(directions), where=lengths > 0)
    radii = radius * rng.random(count) ** (1.0 / n)
    return radii[:, None] * directions


def summarize(records, radius, t_end, seed, config=None):
    config = config or default_config()
    terminal = np.array([record.terminal_norm for record in records])
    converged = sum(
        1 for record in records if not record.diverged and record.terminal_norm < config.convergence_norm)
    return ConvergenceSummary(
        count=len(records),
        converged=converged,
        diverged=sum(1 for record in records if record.diverged),
        max_terminal_norm=float(terminal.max()) if len(terminal) else 0.0,
        monotonicity_violations=sum(record.monotonicity_violations(config.monotone_tol) for record in records),
        radius=float(radius),
        t_end=float(t_end),
        seed=int(seed),
        integrator=records[0].integrator if records else '',
        records=tuple(records),
    )


def convergence_experiment(system, radius, count=None, t_end=None, seed=None, config=None, integrator=None):
    """
    Integrate `count` seeded random starts in the ball of `radius` and count
    how many end within the convergence threshold. Divergence is counted,
    never raised.
    """
    config = config or default_config()
    count = config.simulation_count if count is None else count
    t_end = config.t_end if t_end is None else t_end
    seed = config.seed if seed is None else seed
    if count < 1:
        raise IntegrationError('count must be at least 1.')
    if not radius >= 0:
        raise IntegrationError('radius must be non-negative.')
    x0s = ball_initial_conditions(system.n, radius, count, seed)
    records = integrate_batch(system, x0s, t_end, integrator, config)
    summary = summarize(records, radius, t_end, seed, config)
    logger.info(
        'Convergence experiment on %r: %d/%d converged within radius %g',
        system.label, summary.converged, summary.count, radius)
    return summary


def write_trajectory_csv(stream, record):
    """Columns t, x1..xn, V with a header row."""
    n = record.states.shape[-1]
    header = ','.join(['t'] + [f'x{i}' for i in range(1, n + 1)] + ['V'])
    table = np.column_stack([record.times, record.states, record.v_values])
    np.savetxt(stream, table, delimiter=',', header=header, comments='', fmt='%.17g')
