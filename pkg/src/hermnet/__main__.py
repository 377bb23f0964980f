"""Module entry point: python -m hermnet."""

import sys

from .cli import main

sys.exit(main())
