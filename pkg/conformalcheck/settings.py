"""
Django settings for conformalcheck project.

The project has no HTTP surface: it hosts the ``verification`` app, whose
management commands run the checks and whose database keeps one record per
persisted run.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

from pathlib import Path
from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = config('SECRET_KEY', default='conformalcheck-development-key')

# SECURITY WARNING: don't run with debug turned on in production!
DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'verification',
]


# Database
# https://docs.djangoproject.com/en/5.2/ref/settings/#databases

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}


# Verification defaults
VERIFY_GRID = config('VERIFY_GRID', default=32, cast=int)
VERIFY_ACCEPTANCE_GRID = config('VERIFY_ACCEPTANCE_GRID', default=48, cast=int)
VERIFY_DISCOVERY_GRID = config('VERIFY_DISCOVERY_GRID', default=16, cast=int)
VERIFY_VARIATION_GRID = config('VERIFY_VARIATION_GRID', default=12, cast=int)
VERIFY_SEED = config('VERIFY_SEED', default=20240601, cast=int)
VERIFY_RANDOM_POINTS = config('VERIFY_RANDOM_POINTS', default=100, cast=int)
VERIFY_EXTERIOR_SAMPLES = config('VERIFY_EXTERIOR_SAMPLES', default=500, cast=int)
VERIFY_CHUNK_SIZE = config('VERIFY_CHUNK_SIZE', default=2048, cast=int)
VERIFY_RUNS_DIR = config('VERIFY_RUNS_DIR', default=str(BASE_DIR / 'runs'), cast=Path)


# Logging
LOG_LEVEL = config('LOG_LEVEL', default='INFO')

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
    'loggers': {
        'verification': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
    },
}


# Internationalization
# https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True


# Default primary key field type
# https://docs.djangoproject.com/en/5.2/ref/settings/#default-auto-field

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'
