import logging

from django.apps import AppConfig
from django.conf import settings
from django.core.exceptions import ImproperlyConfigured

# Setting name -> (lower bound, bound is inclusive).
NUMERICAL_SETTINGS = {
    "DEFAULT_GRID_CELLS": (1, True),
    "DEFAULT_CFL": (0.0, False),
    "DEFAULT_T_END": (0.0, False),
    "DEFAULT_AMPLITUDE": (0.0, False),
    "SWEEP_WORKERS": (1, True),
}


def check_settings():
    """Reject numerical defaults no command could run with."""
    for name, (bound, inclusive) in NUMERICAL_SETTINGS.items():
        value = getattr(settings, name)
        if value < bound or (value == bound and not inclusive):
            relation = ">=" if inclusive else ">"
            raise ImproperlyConfigured(f"{name} must be {relation} {bound}, got {value!r}")
    if settings.DEFAULT_CFL > 1:
        raise ImproperlyConfigured(
            f"DEFAULT_CFL must not exceed 1, got {settings.DEFAULT_CFL!r}"
        )


def set_log_level(level):
    """Override the level LOGGING gave the crystab logger and its handlers."""
    logger = logging.getLogger("crystab")
    logger.setLevel(level)
    for handler in logger.handlers:
        handler.setLevel(level)


class CrystabConfig(AppConfig):
    name = "crystab"
    verbose_name = "Crystallizer stability"

    def ready(self):
        check_settings()
