import os

import django


def pytest_configure():
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "crystab_project.settings")
    django.setup(set_prefix=False)
