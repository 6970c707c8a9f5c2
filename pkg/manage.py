#!/usr/bin/env python
"""crystab's command-line utility for stability analysis tasks."""
import os
import sys


def main():
    """Run the crystab command line."""
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "crystab_project.settings")
    try:
        from crystab.cli import run
    except ImportError as exc:
        raise ImportError(
            "Couldn't import crystab. Are Django, numpy, scipy and click installed "
            "and available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
