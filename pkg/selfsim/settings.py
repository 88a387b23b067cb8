from pathlib import Path
import os
from dotenv import load_dotenv

load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.getenv('SELFSIM_SECRET_KEY', 'selfsim-local-only')

DEBUG = os.getenv('SELFSIM_DEBUG', 'False') == 'True'

ALLOWED_HOSTS = []

# Application definition
INSTALLED_APPS = [
    # Local apps
    'fields',
    'caloric',
    'stokes',
    'profiles',
    'evolver',
    'diagnostics',
    'core',
]

# Run registry only
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.getenv('SELFSIM_DB_PATH', str(BASE_DIR / 'runs.sqlite3')),
    }
}

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

TIME_ZONE = 'UTC'
USE_TZ = True

# Logging
LOG_LEVEL = os.getenv('SELFSIM_LOG_LEVEL', 'INFO')

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
            'formatter': 'plain',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': LOG_LEVEL,
    },
}

# Numerical defaults
SELFSIM_DEFAULTS = {
    'half_width': 16.0,
    'n': 64,
    'gamma': 0.5,
    'tol_fixed_point': 1e-8,
    'max_iters': 30,
    'anderson_depth': 0,
    'norm_ceiling': 1e3,
    'duhamel_nodes': 64,
    'sphere_polar': 32,
    'sphere_azimuth': 64,
    'mask_cells': 2.0,
    'lebesgue_m': 3.0,
    't0': 1.0,
    't1': 2.0,
    'dt': 0.01,
}

# Where caloric profiles are cached (SSVF1 dumps)
SELFSIM_CACHE_DIR = Path(os.getenv('SELFSIM_CACHE_DIR', str(BASE_DIR / '.selfsim_cache')))

# Prefix for config overrides: SELFSIM_<SECTION>__<KEY>
SELFSIM_ENV_PREFIX = 'SELFSIM_'

# Record every pipeline run in core.PipelineRun
SELFSIM_RECORD_RUNS = os.getenv('SELFSIM_RECORD_RUNS', 'True') == 'True'
