"""
Django settings for the crystab project.

Values are read from the environment; a ``.env`` file at the repository root is
loaded first so local runs and the docker-compose service share one place to
configure logging verbosity and numerical defaults. ``django.setup()`` applies
LOGGING; the numerical defaults are read through ``django.conf.settings``.
"""

from pathlib import Path

import os
import dotenv

# Build paths inside the project like this: BASE_DIR / "subdir".
BASE_DIR = Path(__file__).resolve().parent.parent

dotenv.load_dotenv(BASE_DIR / ".env")

# Set Logger level in .env file.
LOGGER_LEVEL = os.getenv("CRYSTAB_LOG_LEVEL", "WARNING")


# Application definition

INSTALLED_APPS = [
    "crystab.apps.CrystabConfig",
]

TIME_ZONE = "UTC"

USE_TZ = True


# Numerical defaults

DEFAULT_GRID_CELLS = int(os.getenv("CRYSTAB_GRID_CELLS", "400"))

DEFAULT_CFL = float(os.getenv("CRYSTAB_CFL", "0.5"))

DEFAULT_T_END = float(os.getenv("CRYSTAB_T_END", "5.0"))

DEFAULT_SEED = int(os.getenv("CRYSTAB_SEED", "0"))

# Amplitude of random initial deviations, relative to the equilibrium scale.
DEFAULT_AMPLITUDE = float(os.getenv("CRYSTAB_AMPLITUDE", "0.05"))

SWEEP_WORKERS = int(os.getenv("CRYSTAB_SWEEP_WORKERS", str(os.cpu_count() or 1)))

# repr() keeps every written float round-trippable.
OUTPUT_FLOAT_FORMAT = repr


LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{levelname} {asctime} {module} {message}",
            "style": "{",
        },
        "simple": {
            "format": "{levelname} {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "level": LOGGER_LEVEL,
            "class": "logging.StreamHandler",
            "formatter": "simple",
        },
    },
    "root": {
        "handlers": ["console"],
        "level": "CRITICAL",  # Suppress all root-level logs
    },
    "loggers": {
        "crystab": {
            "handlers": ["console"],
            "level": LOGGER_LEVEL,
            "propagate": False,
        },
    },
}
