"""
Orchestration behind the management commands: run the analyses on a loaded
system and assemble JSON-ready report dictionaries.

Reports are rendered with sorted keys so that two runs with the same input
and seed produce identical bytes outside the "timings" block.
"""
import json
import logging
import math
import time
from contextlib import contextmanager

import attrs
import numpy as np

from . import __version__
from .criteria import (
    ASYMPTOTICALLY_STABLE, LAKSHMIKANTHAM, PAPER, classify, krasovskii_check,
    quadrature_options, region_search,
)
from .hopfield import theorem5_betas
from .ray_integral import ray_field
from .sampling import system_plan
from .serializers import (
    ConvergenceSummarySerializer, KrasovskiiReportSerializer, RegionSearchSerializer,
    StabilityVerdictSerializer, TrajectorySummarySerializer,
)
from .simulate import convergence_experiment, integrate_batch, summarize, write_trajectory_csv

logger = logging.getLogger(__name__)

TOOL_NAME = 'lyapcert'


@contextmanager
def timed(timings, key):
    start = time.perf_counter()
    try:
        yield
    finally:
        timings[key] = round(time.perf_counter() - start, 6)


def radius_value(radius):
    return 'unbounded' if math.isinf(radius) else float(radius)


def render(report):
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + '\n'


def _header(loaded, config):
    system = loaded.system.describe()
    if loaded.builtin:
        system['builtin'] = loaded.builtin
    return {
        'tool': {'name': TOOL_NAME, 'version': __version__},
        'seed': config.seed,
        'system': system,
        'analysis': attrs.asdict(config),
    }


def _plan_summary(plan):
    return {
        'points': len(plan),
        'radius': radius_value(plan.radius),
        'horizon': plan.horizon,
        'shells': [[float(inner), float(outer)] for inner, outer in plan.shells],
    }


def _theorem5_block(loaded, config):
    origin = np.zeros(loaded.system.n)
    profile = theorem5_betas(loaded.network, origin, system=loaded.system, config=config)
    return {
        'point': origin.tolist(),
        'betas': profile.values.tolist(),
        'decay': profile.decay.tolist(),
        'f_diagonal': profile.f_diagonal.tolist(),
    }


# --- analyze ---

def analyze(loaded, config):
    """
    Full analysis: the beta verdict, the Lakshmikantham and Krasovskii
    baselines, and a convergence experiment inside the certified ball.
    """
    system = loaded.system
    timings = {}
    with timed(timings, 'sampling'):
        plan = system_plan(system, config)
    with timed(timings, 'ray_matrices'):
        rays = ray_field(system, plan.points, **quadrature_options(config))
    with timed(timings, 'classify'):
        verdict = classify(system, plan, PAPER, config, rays=rays)
        lakshmikantham = classify(system, plan, LAKSHMIKANTHAM, config, rays=rays)
    with timed(timings, 'krasovskii'):
        krasovskii = krasovskii_check(system, None, plan, config)

    region = None
    if verdict.classification == ASYMPTOTICALLY_STABLE and verdict.certified_radius < plan.radius:
        # the sampled sub-ball is coarse; refine its edge by bisection
        with timed(timings, 'region'):
            region = region_search(system, plan.radius, config.region_tol, config)
        if region.radius > 0:
            verdict = attrs.evolve(verdict, certified_radius=region.radius)

    if verdict.certified and not math.isinf(verdict.certified_radius):
        simulation_radius = verdict.certified_radius
    else:
        simulation_radius = config.simulation_radius
    with timed(timings, 'simulation'):
        summary = convergence_experiment(
            system, simulation_radius, config.simulation_count, config.t_end, config.seed, config)

    report = _header(loaded, config)
    report.update({
        'sampling': _plan_summary(plan),
        'theorem2': StabilityVerdictSerializer(verdict).data,
        'lakshmikantham': StabilityVerdictSerializer(lakshmikantham).data,
        'krasovskii': KrasovskiiReportSerializer(krasovskii).data,
        'certified_radius': radius_value(verdict.certified_radius),
        'region': RegionSearchSerializer(region).data if region else None,
        'simulation': ConvergenceSummarySerializer(summary).data,
    })
    if loaded.network is not None:
        report['theorem5'] = _theorem5_block(loaded, config)
    report['timings'] = timings
    return _plain(report), verdict


def _plain(value):
    """ReturnDict/OrderedDict trees to plain dicts and lists for json."""
    if isinstance(value, dict):
        return {key: _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    return value


# --- region ---

def region(loaded, config, r_max, tol=None):
    timings = {}
    with timed(timings, 'region'):
        search = region_search(loaded.system, r_max, tol, config)
    report = _header(loaded, config)
    report.update({
        'region': RegionSearchSerializer(search).data,
        'certified_radius': search.radius,
        'timings': timings,
    })
    return _plain(report), search


# --- simulate ---

def simulate(loaded, config, x0s, t_end, integrator, csv_dir=None):
    """
    Integrate every initial condition; with csv_dir, write one
    trajectory_NNN.csv per trajectory and summary.json beside them.
    """
    timings = {}
    with timed(timings, 'integration'):
        records = integrate_batch(loaded.system, x0s, t_end, integrator, config)
    radius = float(np.max(np.linalg.norm(x0s, axis=-1))) if len(x0s) else 0.0
    summary = summarize(records, radius, t_end, config.seed, config)

    trajectories = []
    for index, (x0, record) in enumerate(zip(x0s, records)):
        name = None
        if csv_dir is not None:
            name = f'trajectory_{index:03d}.csv'
            with open(csv_dir / name, 'w', newline='') as stream:
                write_trajectory_csv(stream, record)
        trajectories.append(TrajectorySummarySerializer({
            'index': index,
            'x0': x0,
            'terminal_norm': record.terminal_norm,
            'steps': len(record.times) - 1,
            'diverged': record.diverged,
            'monotonicity_violations': record.monotonicity_violations(config.monotone_tol),
            'csv': name,
        }).data)

    report = _header(loaded, config)
    report.update({
        'simulation': ConvergenceSummarySerializer(summary).data,
        'trajectories': trajectories,
        'timings': timings,
    })
    report = _plain(report)
    if csv_dir is not None:
        (csv_dir / 'summary.json').write_text(render(report))
    return report, summary


# --- beta field ---

def grid_points(extent, count):
    """count x count grid over [-extent, extent]^2, x1 varying slowest."""
    axis = np.linspace(-extent, extent, count)
    first, second = np.meshgrid(axis, axis, indexing='ij')
    return np.column_stack([first.ravel(), second.ravel()])


def write_beta_csv(stream, field):
    """Columns x1..xn, beta1..betan with a header row."""
    n = field.points.shape[-1]
    header = ','.join([f'x{i}' for i in range(1, n + 1)] + [f'beta{i}' for i in range(1, n + 1)])
    np.savetxt(stream, np.column_stack([field.points, field.values]),
               delimiter=',', header=header, comments='', fmt='%.17g')
