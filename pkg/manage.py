#!/usr/bin/env python
"""Command-line utility: verification commands and Django's administrative tasks."""
import os
import sys


def main():
    """Run a verification command or an administrative task."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'conformalcheck.settings')
    try:
        import django
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Are you sure it's installed and "
            "available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc
    django.setup()
    from verification.cli import parse_and_dispatch
    sys.exit(parse_and_dispatch(sys.argv[1:]))


if __name__ == '__main__':
    main()
