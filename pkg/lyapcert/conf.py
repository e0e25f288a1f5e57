"""
Settings for the lyapcert app, exposed the way Django REST framework exposes
its own: a lazily-read settings object with a table of defaults.

    from lyapcert.conf import lyapcert_settings
    print(lyapcert_settings.QUAD_TOL)

Values come from the `LYAPCERT` dictionary in the project settings, falling
back to DEFAULTS below. `resolve_config` layers the per-file overrides and the
command-line flags on top (flags win over file, file wins over settings).
"""
import os

import attrs
from django.conf import settings
from django.core.signals import setting_changed
from rest_framework.settings import APISettings

from .exceptions import ConfigurationError

DEFAULTS = {
    'QUAD_TOL': 1e-10,
    'QUAD_MAX_DEPTH': 20,
    'QUAD_NODES': 4,
    'RECONSTRUCTION_RTOL': 1e-8,
    'ZERO_TOL': 1e-10,
    'EQUILIBRIUM_TOL': 1e-8,
    'FD_STEP': 1e-6,
    'MARGIN': 1e-9,
    'HORIZON': 100.0,
    'SEED': 0,
    'POLAR_RADII': 64,
    'POLAR_DIRECTIONS': 128,
    'HALTON_POINTS': 1024,
    'HALTON_PER_SHELL': 4096,
    'CHUNK_SIZE': 4096,
    'REGION_TOL': 1e-2,
    'EIGEN_MAX_SWEEPS': 100,
    'DT': 1e-3,
    'RTOL': 1e-9,
    'ATOL': 1e-9,
    'T_END': 20.0,
    'BLOWUP_NORM': 1e6,
    'CONVERGENCE_NORM': 1e-6,
    'MONOTONE_TOL': 1e-9,
    'SIMULATION_COUNT': 100,
    'SIMULATION_RADIUS': 5.0,
    'NEWTON_MAX_ITER': 100,
    'NEWTON_TOL': 1e-10,
}

SEED_ENV_VAR = 'LYAPCERT_SEED'


class LyapcertSettings(APISettings):
    """
    APISettings reads REST_FRAMEWORK by default; this one reads LYAPCERT.
    """

    @property
    def user_settings(self):
        if not hasattr(self, '_user_settings'):
            self._user_settings = getattr(settings, 'LYAPCERT', {})
        return self._user_settings


lyapcert_settings = LyapcertSettings(None, DEFAULTS)


def reload_lyapcert_settings(*args, **kwargs):
    if kwargs['setting'] == 'LYAPCERT':
        lyapcert_settings.reload()


setting_changed.connect(reload_lyapcert_settings)


@attrs.frozen
class AnalysisConfig:
    """
    The resolved knobs for one run. Field names are the lower-cased keys of
    the defaults table.
    """
    quad_tol: float
    quad_max_depth: int
    quad_nodes: int
    reconstruction_rtol: float
    zero_tol: float
    equilibrium_tol: float
    fd_step: float
    margin: float
    horizon: float
    seed: int
    polar_radii: int
    polar_directions: int
    halton_points: int
    halton_per_shell: int
    chunk_size: int
    region_tol: float
    eigen_max_sweeps: int
    dt: float
    rtol: float
    atol: float
    t_end: float
    blowup_norm: float
    convergence_norm: float
    monotone_tol: float
    simulation_count: int
    simulation_radius: float
    newton_max_iter: int
    newton_tol: float

    @classmethod
    def from_settings(cls):
        return cls(**{key.lower(): getattr(lyapcert_settings, key) for key in DEFAULTS})

    def replace(self, **changes):
        changes = {key: value for key, value in changes.items() if value is not None}
        return attrs.evolve(self, **changes)


def _env_seed(text):
    try:
        seed = int(text)
    except ValueError:
        seed = -1
    if seed < 0:
        raise ConfigurationError(f'{SEED_ENV_VAR} must be a non-negative integer, got {text!r}.')
    return seed


def resolve_config(file_overrides=None, flag_overrides=None):
    """
    Build the AnalysisConfig for a run: settings table, then LYAPCERT_SEED
    (seed only), then the system file's `analysis` block, then flags.
    """
    config = AnalysisConfig.from_settings()
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed not in (None, ''):
        config = config.replace(seed=_env_seed(env_seed))
    if file_overrides:
        config = config.replace(**file_overrides)
    if flag_overrides:
        config = config.replace(**flag_overrides)
    return config


def default_config():
    return resolve_config()
