from pathlib import Path

import environ

BASE_DIR = Path(__file__).resolve().parent.parent

env = environ.Env()
environ.Env.read_env(BASE_DIR / '.env')

DEBUG = env.bool('DEBUG', default=False)
ALLOWED_HOSTS = env.list('ALLOWED_HOSTS', default=['localhost', '127.0.0.1'])

SECRET_KEY = env('SECRET_KEY', default='django-insecure-dev-key-only-for-development')

INSTALLED_APPS = [
    'django.contrib.auth',
    'django.contrib.contenttypes',

    # Third party
    'rest_framework',

    # Local apps
    'simulation',
    'experiments',
]

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': env('DATABASE_PATH', default=str(BASE_DIR / 'db.sqlite3')),
    }
}

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'
USE_TZ = True
TIME_ZONE = 'UTC'

# Logging
LOG_LEVEL = env('LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '%(asctime)s [%(levelname)s] %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
            'stream': 'ext://sys.stderr',
        },
    },
    'loggers': {
        'simulation': {'handlers': ['console'], 'level': LOG_LEVEL, 'propagate': False},
        'experiments': {'handlers': ['console'], 'level': LOG_LEVEL, 'propagate': False},
    },
}

# Simulation toolkit settings
SIMULATION = {
    'TOOLKIT_VERSION': '1.0.0',
    'DEFAULT_SEED': env.int('SIMULATION_SEED', default=20240611),
    'DEFAULT_WORKERS': env.int('SIMULATION_WORKERS', default=1),
    'OUTPUT_DIR': env('SIMULATION_OUTPUT_DIR', default=str(BASE_DIR / 'results')),
    'PATH_BLOCK_SIZE': 2048,          # paths per RNG block (fixes results for any worker count)
    'MIN_PATHS': 1000,
    'GRID_POINTS': 512,
    'SMALL_JUMP_CUT': 1e-4,           # jumps below this are replaced by their mean
    'RARE_EVENT_MIN_HITS': 100,       # direct p*n below this switches to the one-jump estimator
    'QUADRATURE_EPSABS': 1e-10,
    'QUADRATURE_EPSREL': 1e-8,
    'QUADRATURE_LIMIT': 400,
    'POINTS_PER_DECADE': 512,
    'CONDITION_EPSILON': 0.1,
    'Q_MARGINAL_A': 4.0,
    'ENVELOPE_LOWER_THRESHOLD': 0.01,
    'ENVELOPE_UPPER_THRESHOLD': 0.02,
}
