"""
Django settings for LyapcertProject project.

The project hosts a single app, `lyapcert`, which is driven entirely through
management commands (`analyze`, `region`, `simulate`, `beta_field`). There is
no HTTP surface and no database.

For more information on this file, see
https://docs.djangoproject.com/en/5.2/topics/settings/
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# Management commands never serve requests, but Django still wants a key.
SECRET_KEY = os.environ.get('LYAPCERT_SECRET_KEY', 'lyapcert-offline-cli-key')

DEBUG = False

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'rest_framework',
    'lyapcert',
]

# No persistence: systems come from JSON files, reports go to stdout/files.
DATABASES = {}


# Internationalization
# https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# --- LOGGING ---
# Logs go to stderr so that reports and CSV on stdout stay machine-readable.
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'plain',
        },
    },
    'loggers': {
        'lyapcert': {
            'handlers': ['console'],
            'level': os.environ.get('LYAPCERT_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}
# --- END LOGGING ---


# --- LYAPCERT DEFAULTS TABLE ---
# Every numerical default the toolkit uses. Values here override
# lyapcert.conf.DEFAULTS; per-file `analysis` overrides and command-line flags
# override these in turn (flags > file > settings).
LYAPCERT = {
    # Ray-integral quadrature
    'QUAD_TOL': 1e-10,
    'QUAD_MAX_DEPTH': 20,
    'QUAD_NODES': 4,
    'RECONSTRUCTION_RTOL': 1e-8,

    # System construction
    'ZERO_TOL': 1e-10,
    'EQUILIBRIUM_TOL': 1e-8,
    'FD_STEP': 1e-6,

    # Sampling plan and verdicts
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

    # Trajectory simulation
    'DT': 1e-3,
    'RTOL': 1e-9,
    'ATOL': 1e-9,
    'T_END': 20.0,
    'BLOWUP_NORM': 1e6,
    'CONVERGENCE_NORM': 1e-6,
    'MONOTONE_TOL': 1e-9,
    'SIMULATION_COUNT': 100,
    'SIMULATION_RADIUS': 5.0,

    # Hopfield equilibrium search
    'NEWTON_MAX_ITER': 100,
    'NEWTON_TOL': 1e-10,
}
# --- END LYAPCERT DEFAULTS TABLE ---
