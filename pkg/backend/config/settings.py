"""
Django settings for the memnav project.

The project has no HTTP surface; Django hosts the management commands,
the run ledger and the logging configuration.
"""

from pathlib import Path

import dj_database_url
import environ
from django.core.exceptions import ImproperlyConfigured

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

env = environ.Env(
    DJANGO_DEBUG=(bool, False),
    MEMNAV_LOG_LEVEL=(str, "INFO"),
    MEMNAV_FLOAT_DTYPE=(str, "float32"),
    MEMNAV_WORKERS=(int, 1),
)
environ.Env.read_env(BASE_DIR / ".env", overwrite=False)

SECRET_KEY = env("DJANGO_SECRET_KEY", default="django-insecure-memnav-local-key")
DEBUG: bool = env("DJANGO_DEBUG")
ALLOWED_HOSTS: list[str] = []

# Application definition

INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "django.contrib.auth",
    # Local apps
    "core",
    "runs",
    "gridworld",
    "expert",
    "autodiff",
    "memory",
    "planner",
    "simulation",
]

MIDDLEWARE: list[str] = []


# Database
# The run ledger defaults to a local SQLite file so commands work without a server.
DATABASE_URL = env("DATABASE_URL", default=f"sqlite:///{BASE_DIR / 'var' / 'memnav.sqlite3'}")
DATABASES = {
    "default": dj_database_url.parse(DATABASE_URL, conn_max_age=0),
}
if DATABASES["default"]["ENGINE"].endswith("sqlite3"):
    Path(DATABASES["default"]["NAME"]).parent.mkdir(parents=True, exist_ok=True)

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

LANGUAGE_CODE = "en-us"
TIME_ZONE = "UTC"
USE_I18N = False
USE_TZ = True


# Memnav settings
MEMNAV_LOG_LEVEL: str = env("MEMNAV_LOG_LEVEL").upper()
MEMNAV_DATA_ROOT = Path(env("MEMNAV_DATA_ROOT", default=str(BASE_DIR / "var")))
MEMNAV_FLOAT_DTYPE: str = env("MEMNAV_FLOAT_DTYPE")
MEMNAV_WORKERS: int = max(1, env("MEMNAV_WORKERS"))

if MEMNAV_FLOAT_DTYPE not in ("float32", "float64"):
    raise ImproperlyConfigured(f"MEMNAV_FLOAT_DTYPE must be float32 or float64, got {MEMNAV_FLOAT_DTYPE!r}")


# Logging configuration
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{levelname} {asctime} {name} {process:d} {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "verbose",
        },
    },
    "root": {
        "handlers": ["console"],
        "level": "INFO",
    },
    "loggers": {
        "django": {
            "handlers": ["console"],
            "level": env("DJANGO_LOG_LEVEL", default="WARNING"),
            "propagate": False,
        },
        **{
            app: {"handlers": ["console"], "level": MEMNAV_LOG_LEVEL, "propagate": False}
            for app in ("core", "runs", "gridworld", "expert", "autodiff", "memory", "planner", "simulation")
        },
    },
}

# Sentry error tracking, only when a DSN is configured
if env("SENTRY_DSN", default=""):
    import sentry_sdk
    from sentry_sdk.integrations.django import DjangoIntegration

    sentry_sdk.init(
        dsn=env("SENTRY_DSN"),
        integrations=[DjangoIntegration()],
        traces_sample_rate=env.float("SENTRY_TRACES_SAMPLE_RATE", default=0.0),
        send_default_pii=False,
        environment=env("ENV", default="local"),
    )
