"""Pytest wiring: configure Django and a test database as `manage.py test` does."""
import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'conformalcheck.settings')
django.setup()

from django.test.utils import setup_databases, setup_test_environment, teardown_databases, teardown_test_environment  # noqa: E402

_db_state = None


def pytest_sessionstart(session):
    global _db_state
    setup_test_environment()
    _db_state = setup_databases(verbosity=0, interactive=False)


def pytest_sessionfinish(session, exitstatus):
    if _db_state is not None:
        teardown_databases(_db_state, verbosity=0)
    teardown_test_environment()
